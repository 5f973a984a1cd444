//! Fast invariant checks across all modules, run by `memrc selftest`.

use rand::Rng;

use crate::audio::{Mfcc, MfccConfig};
use crate::config::HarnessConfig;
use crate::device::{build_lookup_table, simulate_pd_cycles, SynapseParams, VolatileDeviceParams};
use crate::energy::{efficiency, memristor_count, scaled};
use crate::readout::{gradients, manhattan_update, Gradients, Loss, OutputKind, ReadoutNetwork, Target};
use crate::reservoir::{quantize4, Code4};
use crate::sclc::{fit_segments, Breakpoints, Branch, Conduction, IvTrace, Thresholds};
use crate::seed::{rng_from_seed, SeedTree};
use crate::tasks::timeseries::recurrence;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lookup_states_distinct() -> Result<(), String> {
    let t = build_lookup_table(&VolatileDeviceParams::<f64>::noiseless(), 0, 1, &mut rng_from_seed(0))
        .map_err(|e| e.to_string())?;
    let rows = t.rows();
    for a in 0..16 {
        for b in a + 1..16 {
            let gap = rows[a].iter().zip(&rows[b]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            ensure(gap > 1e-9, || format!("codes {a} and {b} coincide"))?;
        }
    }
    ensure(rows[15][3] == 1.0, || "code 1111 read 4 is not the table maximum".into())
}

fn pd_standard_error() -> Result<(), String> {
    let trace = simulate_pd_cycles(&SynapseParams::<f64>::default(), 100, &mut SeedTree::new(0).rng("selftest/pd"))
        .map_err(|e| e.to_string())?;
    let worst = trace
        .potentiation_stats()
        .into_iter()
        .chain(trace.depression_stats())
        .map(|s| s.relative_standard_error)
        .fold(0.0, f64::max);
    ensure(worst < 0.04, || format!("relative standard error {worst}"))
}

fn quantizer_edges() -> Result<(), String> {
    let q = |x: f64| quantize4(x).map(Code4::value).map_err(|e| e.to_string());
    ensure(q(0.0)? == 0 && q(1.0)? == 15 && q(0.5)? == 8 && q(2.0)? == 15, || "quantizer edges".into())?;
    ensure(quantize4(f64::NAN).is_err(), || "NaN accepted".into())
}

fn random_net(sizes: &[usize], out: OutputKind, seed: u64) -> Result<ReadoutNetwork<f64>, String> {
    ReadoutNetwork::random(sizes, out, &mut rng_from_seed(seed)).map_err(|e| e.to_string())
}

fn gradient_check() -> Result<(), String> {
    let mut rng = rng_from_seed(3);
    for seed in 0..5 {
        let mut net = random_net(&[5, 7, 4, 3], OutputKind::Softmax, seed)?;
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = Target::Class(seed as usize % 3);
        let (g, _) = gradients(&net, &x, &t, Loss::CrossEntropy).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let (mut bad, mut total) = (0, 0);
        for li in 0..net.layers().len() {
            for wi in 0..g.layers[li].weights.len() {
                let orig = net.layers()[li].weights[wi];
                let mut eval = |w: f64| {
                    let mut layers = net.layers().to_vec();
                    layers[li].weights[wi] = w;
                    net = ReadoutNetwork::from_layers(layers, OutputKind::Softmax).unwrap();
                    net.loss(&x, &t, Loss::CrossEntropy).unwrap()
                };
                let fd = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
                eval(orig);
                let an = g.layers[li].weights[wi];
                total += 1;
                if (an - fd).abs() > 1e-4 * an.abs().max(fd.abs()).max(1e-6) {
                    bad += 1;
                }
            }
        }
        ensure(bad * 100 <= total, || format!("{bad}/{total} gradients disagree"))?;
    }
    Ok(())
}

fn manhattan_step() -> Result<(), String> {
    let syn = SynapseParams::<f64>::default();
    let mut net = ReadoutNetwork::<f64>::zeros(&[2, 1], OutputKind::Identity).map_err(|e| e.to_string())?;
    let mut g = Gradients::zeros_like(&net);
    g.layers[0].weights = vec![1.0, -3.0];
    manhattan_update(&mut net, &g, &syn, false, &mut rng_from_seed(0)).map_err(|e| e.to_string())?;
    let w = &net.layers()[0].weights;
    ensure((w[0] + 2.0 / 45.0).abs() < 1e-15 && (w[1] - 2.0 / 45.0).abs() < 1e-15, || format!("{w:?}"))?;
    ensure(net.layers()[0].biases[0] == 0.0, || "zero-gradient bias moved".into())
}

fn energy_arithmetic() -> Result<(), String> {
    let ts = efficiency(27_200.0, 1.0, scaled::<f64>(8896, 6)).map_err(|e| e.to_string())?;
    let sp = efficiency(150.0, 5.5e-3, scaled::<f64>(150, 6)).map_err(|e| e.to_string())?;
    ensure((ts - 3_057_553.0).abs() <= 1.0, || format!("{ts}"))?;
    ensure((sp - 181_818_182.0).abs() <= 1.0, || format!("{sp}"))?;
    ensure(memristor_count(&[20, 128, 64, 1]) == 11_009, || "memristor count".into())
}

fn sclc_recovery() -> Result<(), String> {
    let pts: Vec<(f64, f64)> = (0..40)
        .map(|i| {
            let v = 0.05 * (3.0f64 / 0.05).powf(i as f64 / 39.0);
            (v, if v < 0.5 { 1e-6 * v } else { 1e-6 * 0.5 * (v / 0.5).powf(2.5) })
        })
        .collect();
    let trace = IvTrace::new(pts, Branch::Hrs).map_err(|e| e.to_string())?;
    let fits = fit_segments(&trace, &Breakpoints::Auto { max: 2 }, &Thresholds::default()).map_err(|e| e.to_string())?;
    ensure(fits.len() == 2, || format!("{} regions", fits.len()))?;
    ensure(
        fits[0].classification == Conduction::Ohmic && fits[1].classification == Conduction::Tfl,
        || "wrong classifications".into(),
    )
}

fn recurrence_fixed_point() -> Result<(), String> {
    let y = recurrence(&[0.0f64; 100]);
    let star = (0.9 - 0.61f64.sqrt()) / 0.4;
    ensure((y[99] - star).abs() < 1e-6, || format!("{} vs {star}", y[99]))
}

fn mfcc_silence() -> Result<(), String> {
    let m = Mfcc::<f64>::new(MfccConfig::default()).map_err(|e| e.to_string())?;
    let out = m.compute(&vec![0.0; 16_000]).map_err(|e| e.to_string())?;
    let c0 = 26f64.sqrt() * 1e-10f64.ln();
    ensure(out.len() == 124 && (out[0][0] - c0).abs() < 1e-9, || format!("c0 {}", out[0][0]))
}

fn config_round_trip() -> Result<(), String> {
    let cfg = HarnessConfig::default();
    let back = HarnessConfig::from_json(&cfg.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(back.hash() == cfg.hash(), || "hash changed across round trip".into())?;
    ensure(HarnessConfig::from_json(r#"{"bogus": 1}"#).is_err(), || "unknown key accepted".into())
}

pub fn run() -> Vec<Check> {
    let checks: [(&'static str, fn() -> Result<(), String>); 10] = [
        ("reservoir states distinct", lookup_states_distinct),
        ("P/D standard error", pd_standard_error),
        ("quantizer edges", quantizer_edges),
        ("gradients vs finite differences", gradient_check),
        ("Manhattan step", manhattan_step),
        ("energy arithmetic", energy_arithmetic),
        ("SCLC piecewise recovery", sclc_recovery),
        ("recurrence fixed point", recurrence_fixed_point),
        ("MFCC of silence", mfcc_silence),
        ("config round trip", config_round_trip),
    ];
    checks
        .into_iter()
        .map(|(name, f)| Check { name, outcome: f() })
        .collect()
}
