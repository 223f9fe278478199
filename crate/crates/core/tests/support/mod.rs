#![allow(dead_code, clippy::excessive_precision)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spdt::exposure::{EnvironmentParams, LinkInterval};
use spdt::synth::{generate_trace, SynthConfig};
use spdt::trace::LocationUpdate;

pub const G: f64 = 18.24;
pub const V: f64 = 2512.0;
pub const P: f64 = 0.0075;

pub fn env(r: f64) -> EnvironmentParams {
    EnvironmentParams::new(G, V, P, r).unwrap()
}

/// Concentration written directly from the mass balance, independent of the
/// library: rising while the host is present, decaying afterwards.
pub fn concentration(env: &EnvironmentParams, t_s: f64, t_l: f64, t: f64) -> f64 {
    let (g, v, r) = (env.generation_rate, env.air_volume, env.removal_rate);
    let rising = |t: f64| g / (r * v) * (1.0 - (-r * (t - t_s)).exp());
    if t <= t_l {
        rising(t)
    } else {
        rising(t_l) * (-r * (t - t_l)).exp()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod 7/15 quadrature to relative tolerance `rel`.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    fn go(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gauss_kronrod(f, a, b);
        if err <= tol || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, 0.5 * tol, depth - 1) + go(f, m, b, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (rough, _) = gauss_kronrod(f, a, b);
    go(f, a, b, rel * rough.abs().max(f64::MIN_POSITIVE), 40)
}

/// Dose over a link by quadrature of `p * C(t)` across the neighbour's
/// window, split at the host's departure where `C` has a kink.
pub fn quadrature_exposure(env: &EnvironmentParams, link: &LinkInterval) -> f64 {
    let (t_s, t_l) = (link.host_arrival, link.host_departure);
    let lo = link.neighbour_arrival.max(t_s);
    let hi = link.neighbour_departure;
    let f = |t: f64| env.pulmonary_rate * concentration(env, t_s, t_l, t);
    let mut total = 0.0;
    if lo < t_l.min(hi) {
        total += integrate(&f, lo, t_l.min(hi), 1e-13);
    }
    if hi > t_l.max(lo) {
        total += integrate(&f, t_l.max(lo), hi, 1e-13);
    }
    total
}

/// A random link with a non-empty window covering any of the three cases,
/// including neighbours that arrive before the host.
pub fn random_link<R: Rng>(rng: &mut R) -> LinkInterval {
    let t_s: f64 = rng.random_range(0.0..2000.0);
    let t_l = t_s + rng.random_range(0.5..400.0);
    let t_s_n = rng.random_range(t_s - 60.0..t_l + 200.0);
    let t_l_n = t_s_n.max(t_s) + rng.random_range(0.5..400.0);
    LinkInterval::new(t_s, t_l, t_s_n, t_l_n).unwrap()
}

/// Removal rate for a removal time uniform over the sampler's range.
pub fn random_rate<R: Rng>(rng: &mut R) -> f64 {
    1.0 / rng.random_range(7.5..300.0)
}

/// Local clustering by enumerating every neighbour pair against an
/// adjacency matrix.
pub fn brute_force_clustering(n: usize, edges: &[(u32, u32)]) -> Vec<(usize, usize, f64)> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        if a != b {
            adj[a as usize][b as usize] = true;
            adj[b as usize][a as usize] = true;
        }
    }
    (0..n)
        .map(|v| {
            let nb: Vec<usize> = (0..n).filter(|&u| adj[v][u]).collect();
            let mut t = 0;
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    if adj[nb[i]][nb[j]] {
                        t += 1;
                    }
                }
            }
            let k = nb.len();
            let c = if k < 2 { 0.0 } else { 2.0 * t as f64 / (k * (k - 1)) as f64 };
            (k, t, c)
        })
        .collect()
}

pub fn random_graph(seed: u64) -> (usize, Vec<(u32, u32)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=50);
    let p: f64 = rng.random_range(0.0..0.6);
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.random_bool(p) {
                edges.push(if rng.random() { (a, b) } else { (b, a) });
            }
        }
    }
    (n, edges)
}

/// A small, dense synthetic trace that produces plenty of links.
pub fn small_trace(seed: u64, users: usize, days: u32) -> Vec<LocationUpdate> {
    generate_trace(&SynthConfig {
        n_locations: 25,
        area: (600.0, 600.0),
        active_day_probability: 0.6,
        rng_seed: seed,
        ..SynthConfig::sparse(users, days)
    })
    .unwrap()
}

pub fn upd(user: &str, t: i64, x: f64, y: f64) -> LocationUpdate {
    LocationUpdate {
        user: user.into(),
        t,
        x,
        y,
    }
}

/// Sorts updates into the order the builder expects.
pub fn sorted(mut u: Vec<LocationUpdate>) -> Vec<LocationUpdate> {
    u.sort_by(|a, b| a.user.cmp(&b.user).then(a.t.cmp(&b.t)));
    u
}
