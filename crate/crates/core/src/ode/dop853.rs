use num_complex::Complex64;

use super::{initial_step, scale, stations, Integration};
use crate::error::{Error, Result};

// Hairer & Wanner DOP853 tableau.
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

/// Dormand-Prince 8(5,3) with the original combined error estimate and
/// Lund stabilisation off.
#[derive(Debug, Clone, Copy)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dop853 {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl Dop853 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Integrates `y' = rhs(z, y)` over `[z0, z1]`, landing exactly on each
    /// station in `outputs` (or reporting every accepted step if empty).
    pub fn solve<F, O>(
        &self,
        mut rhs: F,
        z0: f64,
        y0: &[Complex64],
        z1: f64,
        outputs: &[f64],
        mut on_output: O,
    ) -> Result<Integration>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(f64, &[Complex64]),
    {
        let n = y0.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut y = y0.to_vec();
        let mut z = z0;
        let mut result = Integration {
            z,
            y: y.clone(),
            accepted: 0,
            rejected: 0,
            stopped_early: false,
        };
        if z1 <= z0 {
            return Ok(result);
        }
        let stops = stations(z0, z1, outputs);
        let every_step = outputs.is_empty();
        let mut next_stop = 0usize;

        let mut k: Vec<Vec<Complex64>> = vec![vec![zero; n]; 13];
        let mut tmp = vec![zero; n];
        let mut y_new = vec![zero; n];
        let mut sol = vec![zero; n];

        let mut k1 = vec![zero; n];
        rhs(z, &y, &mut k1);
        let mut h = initial_step(&mut rhs, z, &y, &k1, z1 - z0, 8, self.atol, self.rtol)
            .min(self.h_max);
        k[1].copy_from_slice(&k1);
        let mut last_rejected = false;

        while z < z1 {
            if result.accepted + result.rejected >= self.max_steps {
                return Err(Error::TooManySteps {
                    z,
                    max_steps: self.max_steps,
                });
            }
            let target = if every_step || next_stop >= stops.len() {
                z1
            } else {
                stops[next_stop]
            };
            let mut step = h;
            let mut landed = false;
            if z + step >= target || (target - z - step) < 1e-12 * target.abs().max(1.0) {
                step = target - z;
                landed = true;
            }
            if !landed && step.abs() < 1e-14 * z.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { z, h: step });
            }

            macro_rules! stage {
                ($dst:expr, $c:expr, [$(($coef:expr, $idx:expr)),*]) => {{
                    for i in 0..n {
                        let mut acc = zero;
                        $( acc += k[$idx][i] * $coef; )*
                        tmp[i] = y[i] + acc * step;
                    }
                    let mut out = std::mem::take(&mut k[$dst]);
                    rhs(z + $c * step, &tmp, &mut out);
                    k[$dst] = out;
                }};
            }

            stage!(2, C2, [(A21, 1)]);
            stage!(3, C3, [(A31, 1), (A32, 2)]);
            stage!(4, C4, [(A41, 1), (A43, 3)]);
            stage!(5, C5, [(A51, 1), (A53, 3), (A54, 4)]);
            stage!(6, C6, [(A61, 1), (A64, 4), (A65, 5)]);
            stage!(7, C7, [(A71, 1), (A74, 4), (A75, 5), (A76, 6)]);
            stage!(8, C8, [(A81, 1), (A84, 4), (A85, 5), (A86, 6), (A87, 7)]);
            stage!(9, C9, [(A91, 1), (A94, 4), (A95, 5), (A96, 6), (A97, 7), (A98, 8)]);
            stage!(
                10,
                C10,
                [(A101, 1), (A104, 4), (A105, 5), (A106, 6), (A107, 7), (A108, 8), (A109, 9)]
            );
            stage!(
                11,
                C11,
                [
                    (A111, 1),
                    (A114, 4),
                    (A115, 5),
                    (A116, 6),
                    (A117, 7),
                    (A118, 8),
                    (A119, 9),
                    (A1110, 10)
                ]
            );
            stage!(
                12,
                1.0,
                [
                    (A121, 1),
                    (A124, 4),
                    (A125, 5),
                    (A126, 6),
                    (A127, 7),
                    (A128, 8),
                    (A129, 9),
                    (A1210, 10),
                    (A1211, 11)
                ]
            );

            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..n {
                let incr = k[1][i] * B1
                    + k[6][i] * B6
                    + k[7][i] * B7
                    + k[8][i] * B8
                    + k[9][i] * B9
                    + k[10][i] * B10
                    + k[11][i] * B11
                    + k[12][i] * B12;
                sol[i] = y[i] + incr * step;
                let sk = scale(self.atol, self.rtol, y[i], sol[i]);
                let e2 = incr - k[1][i] * BHH1 - k[9][i] * BHH2 - k[12][i] * BHH3;
                err2 += (e2.norm() / sk).powi(2);
                let e = k[1][i] * ER1
                    + k[6][i] * ER6
                    + k[7][i] * ER7
                    + k[8][i] * ER8
                    + k[9][i] * ER9
                    + k[10][i] * ER10
                    + k[11][i] * ER11
                    + k[12][i] * ER12;
                err += (e.norm() / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = step.abs() * err * (1.0 / (deno * n.max(1) as f64)).sqrt();
            if !err.is_finite() {
                result.rejected += 1;
                last_rejected = true;
                h = step * 0.2;
                continue;
            }

            let fac11 = err.max(1e-300).powf(1.0 / 8.0);
            if err <= 1.0 {
                let mut fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
                if last_rejected {
                    fac = fac.max(1.0);
                }
                last_rejected = false;
                z = if landed { target } else { z + step };
                y_new.copy_from_slice(&sol);
                std::mem::swap(&mut y, &mut y_new);
                let mut f_new = std::mem::take(&mut k[1]);
                rhs(z, &y, &mut f_new);
                k[1] = f_new;
                result.accepted += 1;
                if every_step {
                    on_output(z, &y);
                } else if landed && next_stop < stops.len() && target == stops[next_stop] {
                    on_output(z, &y);
                    next_stop += 1;
                }
                let proposal = step / fac;
                h = if landed { h.max(proposal) } else { proposal }.min(self.h_max);
            } else {
                result.rejected += 1;
                last_rejected = true;
                h = step / (fac11 / 0.9).min(3.0);
            }
        }
        result.z = z;
        result.y = y;
        Ok(result)
    }
}
