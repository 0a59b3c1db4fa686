fn main() {
    std::process::exit(ptcoupler::cli::run(std::env::args_os()));
}
