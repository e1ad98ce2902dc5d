//! The experiment registry and one runner per experiment.

use latwalk::calculus::{commutator_identity_check, duhamel_check, dyadic_pieces, gamma_table};
use latwalk::decay::{block_norm_matrix, fit_pve, gaussian_bound_check, PveParams};
use latwalk::fit::{fit_loglog, Gate};
use latwalk::lattice::functional_calculus;
use latwalk::norms::{bochner_riesz_sweep, uniform_multiplier_sweep, wave_growth_fit, write_sweep_csv, SweepRow};
use latwalk::restriction::{
    ball_growth, band_average, curvature_report, dyadic_ladder, extract_surface, gamma_lambda, mu_fourier_decay, n_lambda,
    restriction_st_check, spectral_norm_decay, SpectralDecayOptions,
};
use latwalk::space::{audit_partition, ball_count_check, build_net, build_partition, Metric, MetricModel};
use latwalk::{Error, GridSpec, Multiplier, Operand};
use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig, MultiplierSpec};
use crate::output::{Cell, GateResult, Plot, Table};

/// Why a run stopped before producing verdicts.
#[derive(Debug, Clone)]
pub enum RunError {
    /// The configuration is unusable for this experiment (exit 2).
    Config(String),
    /// A numerical precondition failed at run time (exit 1).
    Numeric(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::TruncationAliasing { .. } | Error::Degenerate(_) | Error::SingularNode { .. } | Error::TooCoarse { .. } => {
                RunError::Numeric(e.to_string())
            }
            _ => RunError::Config(e.to_string()),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration rejected: {m}"),
            RunError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

type Run = Result<Outcome, RunError>;

/// Everything an experiment hands back to the runner.
#[derive(Debug, Default)]
pub struct Outcome {
    pub gates: Vec<GateResult>,
    pub results: Value,
    /// `(file name, CSV bytes)`.
    pub files: Vec<(String, Vec<u8>)>,
    pub plots: Vec<Plot>,
}

impl Outcome {
    fn table(&mut self, t: Table) {
        self.files.push((format!("{}.csv", t.name), t.to_csv()));
    }
}

pub struct Experiment {
    pub name: &'static str,
    pub aliases: &'static [&'static str],
    /// The statement the experiment checks.
    pub claim: &'static str,
    pub run: fn(&ExperimentConfig) -> Run,
}

pub const REGISTRY: &[Experiment] = &[
    Experiment {
        name: "heat-kernel",
        aliases: &["gaussian_bound_check"],
        claim: "A^k(0,0) decays like k^{-n/2} and A^k(0,d) obeys a Gaussian upper bound in |d|^2/k",
        run: heat_kernel,
    },
    Experiment {
        name: "pve-certify",
        aliases: &["block_norm_matrix"],
        claim: "off-diagonal block norms of F(tau^2 (I - A)) decay like (1 + d/tau)^{-(n+a)}",
        run: pve_certify,
    },
    Experiment {
        name: "partition-audit",
        aliases: &["build_partition"],
        claim: "the r-net partition is disjoint, covering, inside r-balls, with bounded annulus counts",
        run: partition_audit,
    },
    Experiment {
        name: "dyadic-reconstruct",
        aliases: &["dyadic_pieces"],
        claim: "the smooth dyadic pieces of F sum back to F",
        run: dyadic_reconstruct,
    },
    Experiment {
        name: "commutator-suite",
        aliases: &["commutator_identity_check", "duhamel_check"],
        claim: "eta^kappa T expands in iterated commutators with binomial coefficients, and the Duhamel formula holds",
        run: commutator_suite,
    },
    Experiment {
        name: "wave-growth",
        aliases: &["wave_growth_fit"],
        claim: "||e^{itA} A||_{1->1} grows at most like t^{n/2}",
        run: wave_growth,
    },
    Experiment {
        name: "multiplier-uniform",
        aliases: &["uniform_multiplier_sweep"],
        claim: "||F(t(I - A))||_{1->1} is bounded uniformly in t for smooth F supported in (0, 1/n)",
        run: multiplier_uniform,
    },
    Experiment {
        name: "bochner-riesz",
        aliases: &["bochner_riesz_sweep"],
        claim: "Bochner-Riesz means (1 - (I - A)/R)_+^alpha are uniformly bounded for alpha > n/2 and not at alpha = 0",
        run: bochner_riesz,
    },
    Experiment {
        name: "surface-curvature",
        aliases: &["curvature", "n_lambda"],
        claim: "level surfaces near the top of the spectrum have curvature bounded below and N(lambda) ~ (1 - lambda)^{-1/2}",
        run: surface_curvature,
    },
    Experiment {
        name: "mu-decay",
        aliases: &["mu_fourier_decay"],
        claim: "the rescaled surface measure has Fourier decay (1 + |xi|)^{-(n-1)/2} and ball growth r^{n-1}",
        run: mu_decay,
    },
    Experiment {
        name: "spectral-measure-decay",
        aliases: &["spectral_norm_decay", "gamma_lambda"],
        claim: "||dE(lambda)||_{1->inf} = sup_d |Gamma_lambda(d)| behaves like (1 - lambda)^{n/2 - 1}",
        run: spectral_measure_decay,
    },
    Experiment {
        name: "restriction-st",
        aliases: &["restriction_st_check"],
        claim: "||F(A^k) A^k||_{1->2}^2 decays like k^{-n/2}",
        run: restriction_st,
    },
];

/// Registry entry by name or alias; unknown names suggest the nearest entry.
pub fn lookup(name: &str) -> Result<&'static Experiment, ConfigError> {
    if let Some(e) = REGISTRY.iter().find(|e| e.name == name || e.aliases.contains(&name)) {
        return Ok(e);
    }
    let nearest = REGISTRY
        .iter()
        .flat_map(|e| std::iter::once(e.name).chain(e.aliases.iter().copied()).map(move |k| (k, e.name)))
        .min_by_key(|(k, _)| strsim::levenshtein(k, name))
        .map(|(_, n)| n)
        .unwrap_or("heat-kernel");
    Err(ConfigError::new(format!("unknown experiment \"{name}\"; did you mean \"{nearest}\"?")))
}

fn primary(cfg: &ExperimentConfig, default: Gate) -> Gate {
    cfg.gate.map(Gate::from).unwrap_or(default)
}

fn multiplier(cfg: &ExperimentConfig, default: MultiplierSpec) -> Multiplier {
    cfg.multiplier.clone().unwrap_or(default).build()
}

fn grid(cfg: &ExperimentConfig, defaults: [usize; 3]) -> Result<GridSpec, RunError> {
    Ok(GridSpec::new(cfg.n, cfg.grid.unwrap_or(defaults[cfg.n - 1]))?)
}

fn surface_dims(cfg: &ExperimentConfig) -> Result<(), RunError> {
    if cfg.n < 2 {
        return Err(RunError::Config("level-surface experiments need n = 2 or 3".into()));
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn sweep_file(name: &str, rows: &[SweepRow]) -> Result<(String, Vec<u8>), RunError> {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf)?;
    Ok((format!("{name}.csv"), buf))
}

fn heat_kernel(cfg: &ExperimentConfig) -> Run {
    let n = cfg.n;
    let ks = cfg.ladders.k.clone().unwrap_or_else(|| if n == 3 { vec![16, 32, 64, 128] } else { vec![16, 32, 64, 128, 256] });
    let rep = gaussian_bound_check(n, &ks)?;
    let tol = if n == 1 { 0.05 } else { 0.1 };
    let fit = rep.on_diagonal.clone().with_gate(primary(cfg, Gate::Within { target: -(n as f64) / 2.0, tol }));
    let mut out = Outcome {
        gates: vec![GateResult::from_fit("on-diagonal exponent", &fit), GateResult::from_fit("gaussian tail slope", &rep.tail)],
        results: json!({ "on_diagonal": fit, "tail": rep.tail, "width": rep.width, "ks": rep.ks }),
        ..Default::default()
    };
    let mut t = Table::new("heat_kernel", &["k", "diagonal", "fitted"]);
    for (k, v) in rep.ks.iter().zip(&rep.diagonal) {
        t.row(vec![Cell::I(*k as i64), Cell::F(*v), Cell::F(fit.predict(*k as f64))]);
    }
    out.table(t);
    out.plots.push(
        Plot::new("heat_kernel", "on-diagonal walk kernel", "k", "A^k(0,0)")
            .series("A^k(0,0)", rep.ks.iter().zip(&rep.diagonal).map(|(k, v)| (*k as f64, *v)))
            .series("fit", rep.ks.iter().map(|&k| (k as f64, fit.predict(k as f64)))),
    );
    Ok(out)
}

fn pve_certify(cfg: &ExperimentConfig) -> Run {
    let n = cfg.n;
    let grid = grid(cfg, [512, 256, 160])?;
    let tau = cfg.params.tau.unwrap_or(4.0);
    let params = PveParams::new(cfg.params.p.unwrap_or(1.0), tau, cfg.params.a.unwrap_or(1.0))?;
    let f = multiplier(cfg, MultiplierSpec::Gaussian { sigma: 1.0 });
    let op = functional_calculus(grid, &f, Operand::ScaledIMinusA(tau * tau))?;
    op.check_tail(cfg.tolerance("tail", 1e-8))?;
    let side = cfg.params.side.unwrap_or(if n == 3 { 24 } else { grid.samples() / 2 });
    let model = MetricModel::lattice_box(&vec![side; n], Metric::LInf)?;
    let centers = build_net(&model, tau)?;
    let part = build_partition(&model, &centers, tau)?;
    let bm = block_norm_matrix(&op, &model, &part, &params)?;
    let mut verdict = fit_pve(&bm, &params)?;
    if let (Some(g), Some(fit)) = (cfg.gate, verdict.fit.as_mut()) {
        *fit = fit.clone().with_gate(g.into());
        verdict.pass = fit.passed();
    }
    let mut gates = vec![GateResult::holds("block decay certified", verdict.pass)];
    if let Some(fit) = &verdict.fit {
        gates.push(GateResult::from_fit("block decay exponent", fit));
    }
    let mut buf = Vec::new();
    bm.write_csv(&mut buf)?;
    let mut out = Outcome {
        gates,
        results: json!({ "verdict": verdict, "blocks": part.len(), "exact": bm.exact, "tail_mass": op.tail_mass() }),
        files: vec![("blocks.csv".into(), buf)],
        ..Default::default()
    };
    let k = bm.norms.nrows();
    let pts: Vec<(f64, f64)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).filter(|(i, j)| i != j)
        .map(|(i, j)| (1.0 + bm.distances[(i, j)] / tau, bm.norms[(i, j)]))
        .collect();
    out.plots.push(Plot::new("blocks", "off-diagonal block norms", "1 + d/tau", "block norm").series("blocks", pts));
    Ok(out)
}

fn partition_audit(cfg: &ExperimentConfig) -> Run {
    let n = cfg.n;
    let side = cfg.params.side.unwrap_or([4096, 256, 32][n - 1]);
    let tau = cfg.params.tau.unwrap_or(4.0);
    let model = MetricModel::lattice_box(&vec![side; n], Metric::LInf)?;
    let centers = build_net(&model, tau)?;
    let part = build_partition(&model, &centers, tau)?;
    let audit = audit_partition(&model, &part);
    let counts = ball_count_check(&model, &part, tau, cfg.params.k_max.unwrap_or(3));
    let at_most_zero = Gate::AtMost { bound: 0.0 };
    let mut out = Outcome {
        gates: vec![
            GateResult::new("partition violations", audit.violations() as f64, at_most_zero),
            GateResult::new("annulus packing violations", counts.volume_bound_violations as f64, at_most_zero),
            GateResult::holds("annulus counts bounded", !counts.unbounded_growth),
        ],
        results: json!({ "audit": audit, "annulus": counts, "centers": part.len() }),
        ..Default::default()
    };
    let mut t = Table::new("annulus_counts", &["k", "max_count", "normalized"]);
    for (k, c, v) in &counts.rows {
        t.row(vec![Cell::I(*k as i64), Cell::I(*c as i64), Cell::F(*v)]);
    }
    out.table(t);
    Ok(out)
}

fn dyadic_reconstruct(cfg: &ExperimentConfig) -> Run {
    let f = multiplier(cfg, MultiplierSpec::Gaussian { sigma: 1.0 });
    let level = cfg.params.level.unwrap_or(12);
    let dec = dyadic_pieces(&f, level)?;
    let tol = cfg.tolerance("reconstruction", 1e-8);
    let mut buf = Vec::new();
    dec.write_csv(&mut buf)?;
    Ok(Outcome {
        gates: vec![GateResult::new("reconstruction residual", dec.residual, primary(cfg, Gate::AtMost { bound: tol }))],
        results: json!({ "level": dec.level, "residual": dec.residual, "flagged": dec.flagged }),
        files: vec![("dyadic_pieces.csv".into(), buf)],
        ..Default::default()
    })
}

fn commutator_suite(cfg: &ExperimentConfig) -> Run {
    let trials = cfg.params.trials.unwrap_or(20);
    let kappa = cfg.params.kappa.unwrap_or(5);
    let size = cfg.params.size.unwrap_or(8);
    let order = cfg.params.order.unwrap_or(32);
    let time = cfg.params.time.unwrap_or(1.0);
    let table_ok = gamma_table(kappa)?.satisfies_recursion();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = Table::new("commutators", &["trial", "kappa", "identity_residual", "duhamel_residual"]);
    let (mut worst_id, mut worst_du) = (0.0f64, 0.0f64);
    for trial in 0..trials {
        let m = DMatrix::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0));
        let eta: Vec<f64> = (0..size).map(|_| rng.random_range(0.0..2.0)).collect();
        let b = DMatrix::from_fn(size, size, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = (&b + b.adjoint()) * Complex::new(0.5, 0.0);
        let du = duhamel_check(&h, &eta, time, order)?.residual;
        worst_du = worst_du.max(du);
        for k in 1..=kappa {
            let r = commutator_identity_check(&m, &eta, k)?;
            worst_id = worst_id.max(r);
            t.row(vec![Cell::I(trial as i64), Cell::I(k as i64), Cell::F(r), Cell::F(du)]);
        }
    }
    let mut out = Outcome {
        gates: vec![
            GateResult::holds("binomial recursion", table_ok),
            GateResult::new("identity residual", worst_id, primary(cfg, Gate::AtMost { bound: cfg.tolerance("identity", 1e-10) })),
            GateResult::new("duhamel residual", worst_du, Gate::AtMost { bound: cfg.tolerance("duhamel", 1e-8) }),
        ],
        results: json!({ "trials": trials, "kappa": kappa, "size": size, "order": order, "identity": worst_id, "duhamel": worst_du }),
        ..Default::default()
    };
    out.table(t);
    Ok(out)
}

fn wave_growth(cfg: &ExperimentConfig) -> Run {
    let n = cfg.n;
    let grid = grid(cfg, [8192, 512, 128])?;
    let ts = cfg.ladders.t.clone().unwrap_or_else(|| (0..=if n == 3 { 4 } else { 6 }).map(|i| 2f64.powi(i)).collect());
    let wg = wave_growth_fit(grid, &ts)?;
    let fit = wg.fit.clone().with_gate(primary(cfg, Gate::AtMost { bound: n as f64 / 2.0 + 0.2 }));
    let mut out = Outcome {
        gates: vec![GateResult::from_fit("growth exponent", &fit), GateResult::holds("no truncated rows", wg.truncated.is_empty())],
        results: json!({ "fit": fit, "truncated": wg.truncated, "rows": wg.rows }),
        files: vec![sweep_file("wave_growth", &wg.rows)?],
        ..Default::default()
    };
    out.plots.push(
        Plot::new("wave_growth", "wave propagator norms", "t", "||e^{itA}A||_{1->1}")
            .series("norm", wg.rows.iter().map(|r| (r.parameter, r.upper)))
            .series("fit", wg.rows.iter().map(|r| (r.parameter, fit.predict(r.parameter)))),
    );
    Ok(out)
}

fn multiplier_uniform(cfg: &ExperimentConfig) -> Run {
    let n = cfg.n as f64;
    let grid = grid(cfg, [256, 256, 64])?;
    let ts = cfg.ladders.t.clone().unwrap_or_else(|| (0..=12).map(|i| 10f64.powf(i as f64 / 4.0)).collect());
    let f = multiplier(cfg, MultiplierSpec::Bump { lo: 0.1 / n, hi: 0.9 / n, steepness: 32.0 });
    let budget = cfg.params.max_points.unwrap_or(if cfg.n == 1 { 1 << 22 } else { 1 << 24 });
    let sweep = uniform_multiplier_sweep(&f, grid, &ts, budget)?;
    let mut gates = vec![
        GateResult::new("max over median", sweep.max_over_median, Gate::AtMost { bound: 3.0 }),
        GateResult::new("ladder points beyond the grid budget", sweep.truncated.len() as f64, Gate::AtMost { bound: 0.0 }),
    ];
    if let Some(fit) = &sweep.fit {
        gates.insert(0, GateResult::from_fit("log-log slope", &fit.clone().with_gate(primary(cfg, Gate::AtMost { bound: 0.05 }))));
    }
    let mut out = Outcome {
        gates,
        results: to_value(&sweep),
        files: vec![sweep_file("multiplier_uniform", &sweep.rows)?],
        ..Default::default()
    };
    out.plots.push(
        Plot::new("multiplier_uniform", "dilated multiplier norms", "t", "||F(t(I-A))||_{1->1}")
            .series("norm", sweep.rows.iter().map(|r| (r.parameter, r.upper))),
    );
    Ok(out)
}

fn bochner_riesz(cfg: &ExperimentConfig) -> Run {
    let n = cfg.n as f64;
    let grid = grid(cfg, [2048, 128, 32])?;
    let radii = cfg.ladders.radius.clone().unwrap_or_else(|| [0.4, 0.2, 0.1, 0.05].iter().map(|r| r / n).collect());
    let alphas = cfg.ladders.alpha.clone().unwrap_or_else(|| vec![0.0, 10.0]);
    let rows = bochner_riesz_sweep(grid, &alphas, &radii)?;
    let mut gates = Vec::new();
    let mut t = Table::new("bochner_riesz", &["alpha", "inverse_radius", "lower", "upper", "contaminated"]);
    let mut s = Table::new("bochner_riesz_summary", &["alpha", "slope", "grid_growth", "bounded"]);
    let mut plot = Plot::new("bochner_riesz", "Bochner-Riesz means", "1/R", "norm");
    for r in &rows {
        if r.alpha > n / 2.0 {
            gates.push(GateResult::holds(format!("alpha = {} bounded", r.alpha), r.bounded));
        } else if r.alpha == 0.0 {
            gates.push(GateResult::holds("alpha = 0 unbounded", !r.bounded));
        }
        for row in &r.rows {
            t.row(vec![Cell::F(r.alpha), Cell::F(row.parameter), Cell::F(row.lower), Cell::F(row.upper), Cell::B(row.contaminated)]);
        }
        s.row(vec![Cell::F(r.alpha), Cell::F(r.slope.unwrap_or(f64::NAN)), Cell::F(r.grid_growth), Cell::B(r.bounded)]);
        plot = plot.series(&format!("alpha = {}", r.alpha), r.rows.iter().map(|x| (x.parameter, x.upper)));
    }
    let mut out = Outcome { gates, results: to_value(&rows), plots: vec![plot], ..Default::default() };
    out.table(t);
    out.table(s);
    Ok(out)
}

fn surface_resolution(cfg: &ExperimentConfig) -> usize {
    cfg.params.resolution.unwrap_or(if cfg.n == 2 { 64 } else { 24 })
}

fn surface_curvature(cfg: &ExperimentConfig) -> Run {
    surface_dims(cfg)?;
    let n = cfg.n;
    let res = surface_resolution(cfg);
    let ladder = cfg.ladders.lambda.clone().unwrap_or_else(|| dyadic_ladder(n, 3..=8));
    let mut t = Table::new("curvature", &["lambda", "n_lambda", "min_abs_k", "max_abs_k", "refined_min_abs_k", "method_gap"]);
    let (mut min_k, mut drift, mut gap, mut cos_ok) = (f64::INFINITY, 0.0f64, 0.0f64, true);
    let mut ns = Vec::new();
    let mut surface_csv = Vec::new();
    for (i, &l) in ladder.iter().enumerate() {
        let s = extract_surface(n, l, res)?;
        let a = curvature_report(&s)?;
        let b = curvature_report(&s.refined(2)?)?;
        let nl = n_lambda(&s)?;
        if i == 0 {
            s.write_csv(&mut surface_csv)?;
        }
        min_k = min_k.min(a.min_abs);
        drift = drift.max((a.min_abs / b.min_abs - 1.0).abs());
        gap = gap.max(a.method_gap);
        cos_ok &= a.cosine_bound_holds;
        ns.push((l, nl));
        t.row(vec![Cell::F(l), Cell::F(nl), Cell::F(a.min_abs), Cell::F(a.max_abs), Cell::F(b.min_abs), Cell::F(a.method_gap)]);
    }
    let xs: Vec<f64> = ns.iter().map(|r| 1.0 - r.0).collect();
    let ys: Vec<f64> = ns.iter().map(|r| r.1).collect();
    let fit = fit_loglog(&xs, &ys)?.with_gate(primary(cfg, Gate::Within { target: -0.5, tol: 0.1 }));
    let mut out = Outcome {
        gates: vec![
            GateResult::from_fit("N(lambda) exponent", &fit),
            GateResult::new("min |K|", min_k, Gate::AtLeast { bound: 1e-6 }),
            GateResult::new("min |K| refinement drift", drift, Gate::AtMost { bound: 0.05 }),
            GateResult::new("curvature method gap", gap, Gate::AtMost { bound: 1e-10 }),
            GateResult::holds("cosine lower bound", cos_ok),
        ],
        results: json!({ "n_lambda_fit": fit, "min_abs_curvature": min_k, "refinement_drift": drift }),
        files: vec![("surface.csv".into(), surface_csv)],
        ..Default::default()
    };
    out.table(t);
    out.plots.push(
        Plot::new("n_lambda", "surface density N(lambda)", "1 - lambda", "N(lambda)")
            .series("N", xs.iter().copied().zip(ys.iter().copied())),
    );
    Ok(out)
}

fn mu_decay(cfg: &ExperimentConfig) -> Run {
    surface_dims(cfg)?;
    let n = cfg.n;
    let res = surface_resolution(cfg);
    let ladder = cfg.ladders.lambda.clone().unwrap_or_else(|| dyadic_ladder(n, [3, 5, 7]));
    let xi_max = cfg.params.xi_max.unwrap_or(if n == 2 { 1000.0 } else { 16.0 });
    let rays = cfg.params.rays.unwrap_or(8);
    let radii = cfg.ladders.radius.clone().unwrap_or_else(|| {
        let lo: f64 = if n == 2 { 0.01 } else { 0.2 };
        (0..=6).map(|k| lo * (1.0 / lo).powf(k as f64 / 6.0)).collect()
    });
    let centers = cfg.params.centers.unwrap_or(if n == 2 { 200 } else { 50 });
    let mut env = Table::new("mu_envelope", &["lambda", "xi", "sup_abs_mu_hat"]);
    let mut balls = Table::new("ball_growth", &["lambda", "radius", "sup_mass"]);
    let mut gates = Vec::new();
    let mut m1 = Vec::new();
    let mut sups = Vec::new();
    let mut plot = Plot::new("mu_decay", "Fourier decay of the surface measure", "|xi|", "sup |mu^|");
    let mut results = Vec::new();
    for (i, &l) in ladder.iter().enumerate() {
        let s = extract_surface(n, l, res)?;
        let mu = mu_fourier_decay(&s, xi_max, rays)?;
        let fit = if i == 0 { mu.fit.clone().with_gate(primary(cfg, mu.fit.target.expect("gated fit"))) } else { mu.fit.clone() };
        gates.push(GateResult::from_fit(format!("mu decay exponent at lambda = {l}"), &fit));
        let bg = ball_growth(&s, &radii, centers, cfg.seed.wrapping_add(i as u64))?;
        gates.push(GateResult::from_fit(format!("ball growth exponent at lambda = {l}"), &bg.fit));
        for (x, v) in &mu.envelope {
            env.row(vec![Cell::F(l), Cell::F(*x), Cell::F(*v)]);
        }
        for (r, v) in bg.radii.iter().zip(&bg.sup_mass) {
            balls.row(vec![Cell::F(l), Cell::F(*r), Cell::F(*v)]);
        }
        plot = plot.series(&format!("lambda = {l}"), mu.envelope.iter().copied());
        m1.push(bg.m1);
        sups.push(mu.weighted_sup);
        results.push(json!({ "lambda": l, "mu": mu, "balls": bg }));
    }
    let spread = |v: &[f64]| v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min);
    gates.push(GateResult::new("ball constant spread", spread(&m1), Gate::AtMost { bound: 1.2 }));
    gates.push(GateResult::new("weighted Fourier sup spread", spread(&sups), Gate::AtMost { bound: 1.5 }));
    let mut out = Outcome { gates, results: Value::Array(results), plots: vec![plot], ..Default::default() };
    out.table(env);
    out.table(balls);
    Ok(out)
}

fn spectral_measure_decay(cfg: &ExperimentConfig) -> Run {
    surface_dims(cfg)?;
    let n = cfg.n;
    let p = cfg.params.p.unwrap_or(1.0);
    let ladder = cfg.ladders.lambda.clone().unwrap_or_else(|| dyadic_ladder(n, 2..=7));
    let mut opts = SpectralDecayOptions { resolution: surface_resolution(cfg), ..Default::default() };
    if let Some(w) = cfg.params.window {
        opts.window = w;
    }
    if let Some(m) = cfg.grid {
        opts.samples = m;
    }
    let dec = spectral_norm_decay(n, p, &ladder, opts)?;
    let default_gate = dec.fit.target.expect("gated fit");
    let fit = dec.fit.clone().with_gate(primary(cfg, default_gate));
    let mut gates = vec![GateResult::from_fit("density exponent", &fit)];
    let mut t = Table::new("spectral_decay", &["lambda", "norm"]);
    for (l, v) in &dec.rows {
        t.row(vec![Cell::F(*l), Cell::F(*v)]);
    }
    let mut cross = Table::new("band_cross_check", &["d_1", "d_2", "surface", "band"]);
    if n == 2 {
        let lambda = 0.3;
        let delta = cfg.params.delta.unwrap_or(0.01);
        let g = gamma_lambda(&extract_surface(2, lambda, 128)?, 1)?;
        let b = band_average(GridSpec::new(2, cfg.grid.unwrap_or(2048))?, lambda, delta, 1)?;
        let mut worst = 0.0f64;
        for d in [[0i64, 0], [1, 0], [1, 1]] {
            let (x, y) = (g.get(&d).unwrap_or(0.0), b.get(&d).unwrap_or(0.0));
            worst = worst.max((x - y).abs() / x.abs());
            cross.row(vec![Cell::I(d[0]), Cell::I(d[1]), Cell::F(x), Cell::F(y)]);
        }
        gates.push(GateResult::new("surface vs band agreement", worst, Gate::AtMost { bound: cfg.tolerance("agreement", 0.02) }));
    }
    let mut out = Outcome {
        gates,
        results: json!({ "decay": dec, "fit": fit }),
        ..Default::default()
    };
    out.plots.push(
        Plot::new("spectral_decay", "spectral density sup", "1 - lambda", "sup |Gamma|")
            .series("sup |Gamma|", dec.rows.iter().map(|(l, v)| (1.0 - l, *v))),
    );
    out.table(t);
    if !cross.is_empty() {
        out.table(cross);
    }
    Ok(out)
}

fn restriction_st(cfg: &ExperimentConfig) -> Run {
    let n = cfg.n;
    let nf = n as f64;
    let ks = cfg.ladders.k.clone().unwrap_or_else(|| (if n == 3 { 1..=4 } else { 3..=9 }).map(|j| 1u32 << j).collect());
    let f = multiplier(cfg, MultiplierSpec::Bump { lo: 1.0 - 1.0 / (2.0 * nf), hi: 1.0 - 1.0 / (4.0 * nf), steepness: 1.0 });
    let rep = restriction_st_check(n, &ks, &f)?;
    let mut gates = vec![GateResult::new("grid consistency", rep.grid_change, Gate::AtMost { bound: 0.01 })];
    if let Some(fit) = &rep.fit {
        gates.insert(0, GateResult::from_fit("raw exponent", &fit.clone().with_gate(primary(cfg, fit.target.expect("gated fit")))));
    }
    if let Some(fit) = &rep.normalized_fit {
        gates.push(GateResult::from_fit("normalized exponent", fit));
    }
    let mut t = Table::new("restriction_st", &["k", "norm_squared", "normalized"]);
    for (k, v, w) in &rep.rows {
        t.row(vec![Cell::I(*k as i64), Cell::F(*v), Cell::F(*w)]);
    }
    let mut out = Outcome { gates, results: to_value(&rep), ..Default::default() };
    out.plots.push(
        Plot::new("restriction_st", "restricted multiplier norms", "k", "||F(A^k)A^k||^2")
            .series("norm^2", rep.rows.iter().map(|r| (r.0 as f64, r.1))),
    );
    out.table(t);
    Ok(out)
}
