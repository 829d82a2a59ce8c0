//! Runs a parsed [`ExperimentConfig`] and collects tables and pass/fail checks.
//!
//! Nothing here touches the filesystem; the command-line front end decides
//! where tables and summaries go.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::classical::{classical_equilibrium_density, classical_moments, ClassicalEnsemble, Constant};
use crate::config::{ExperimentConfig, FlowFamily, ObservableSpec, ProductFamily, ScalingSpec, WignerSpec};
use crate::dynamics::{decay_scan, dyadic_suprema, equilibrium_state, evolve_state, liouvillian_apply};
use crate::error::{Error, Result};
use crate::fixtures::Fixtures;
use crate::model::DeltaWell;
use crate::pointer::{
    commutator_expectation, diagonalize_blocks, moment_check, pointer_observables, transform_observable,
    transform_state, Basis, PointerTransform,
};
use crate::spectral::{
    dual_pairing, max_abs, CMat, ObservableFn, QuantumNumbers, Sector, SpectrumGrid, StateFn, HERMITICITY_TOL,
    NORMALIZATION_TOL,
};
use crate::wigner::{
    hbar_scaling, moyal_vs_poisson, phase_space_pairing, position_kernel, product_correspondence, wigner_observable,
    wigner_state, PhaseSpaceGrid, ScalingReport, Window,
};

/// Invariants that hold to rounding.
pub const EXACT_TOL: f64 = 1e-12;
pub const PAIRING_TOL: f64 = 1e-4;
pub const WIGNER_NORMALIZATION_TOL: f64 = 1e-6;
pub const REALNESS_TOL: f64 = 1e-10;
pub const MIN_SLOPE: f64 = 0.9;
/// Continuum nodes visited by the moment table.
const MOMENT_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value >= limit }
    }
}

/// A CSV-shaped result: `file` is the stem, one header per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(file: &str, header: &[&str]) -> Self {
        Self { file: file.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub passed: bool,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Report {
    fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            seed,
            passed: true,
            values: BTreeMap::new(),
            checks: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.into(), v);
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file == file)
    }
}

fn missing(section: &str) -> Error {
    Error::Config(format!("this command needs a [{section}] section"))
}

struct Setting {
    grid: Arc<SpectrumGrid>,
    qnums: Arc<QuantumNumbers>,
    fixtures: Fixtures,
}

fn setting(cfg: &ExperimentConfig) -> Result<Setting> {
    let (grid, qnums) = cfg.spectrum.as_ref().ok_or_else(|| missing("spectrum"))?.build()?;
    Ok(Setting { grid, qnums, fixtures: Fixtures::new(cfg.seed) })
}

fn state(cfg: &ExperimentConfig, s: &mut Setting) -> Result<StateFn> {
    cfg.state.as_ref().ok_or_else(|| missing("state"))?.build(&s.grid, &s.qnums, &mut s.fixtures)
}

/// Deficit series and dyadic suprema of `|(ρ(t) − ρ*|O)|`.
pub fn run_evolve(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.evolve.as_ref().ok_or_else(|| missing("evolve"))?;
    let mut s = setting(cfg)?;
    let rho = state(cfg, &mut s)?;
    let o = cfg.observable.as_ref().ok_or_else(|| missing("observable"))?.build(&s.grid, &s.qnums, &mut s.fixtures)?;
    let times = spec.times.times()?;
    let scan = decay_scan(&rho, &o, &times, spec.mode, ("state", "observable"))?;

    let mut report = Report::new("evolve", cfg.seed);
    let mut decay = Table::new(
        "decay",
        &["t", "expectation (rho(t)|O)", "equilibrium (rho*|O)", "deficit |(rho(t) - rho*|O)|"],
    );
    for (i, &t) in scan.times.iter().enumerate() {
        decay.rows.push(vec![t, scan.expectations[i], scan.equilibrium, scan.deficits[i]]);
    }
    report.tables.push(decay);
    report.value("equilibrium", scan.equilibrium);
    report.value("initial_deficit", scan.deficits[0]);
    report.value("final_deficit", *scan.deficits.last().expect("times are non-empty"));
    if let Some(r) = scan.final_ratio().filter(|r| r.is_finite()) {
        report.value("final_ratio", r);
    }

    if let Some(d) = &spec.dyadic {
        let sup = dyadic_suprema(&rho, &o, d.t0, d.levels, d.samples, spec.mode)?;
        let mut table = Table::new("dyadic", &["window start 2^j T", "sup deficit over [2^j T, 2^(j+1) T]"]);
        for (j, &v) in sup.iter().enumerate() {
            table.rows.push(vec![d.t0 * (1u64 << j) as f64, v]);
        }
        report.tables.push(table);
        let worst = sup
            .windows(2)
            .map(|p| if p[0] == 0.0 && p[1] == 0.0 { 0.0 } else { p[1] / p[0] })
            .fold(0.0, f64::max);
        report.value("dyadic_worst_ratio", worst);
        let pass = worst < 1.0 || sup.iter().all(|&v| v == 0.0);
        report.check(Check { name: "dyadic suprema strictly decrease".into(), value: worst, limit: 1.0, pass });
    }
    Ok(report.finish())
}

fn labelwise_off_diagonal(m: &CMat) -> f64 {
    let mut off = m.clone();
    off.fill_diagonal(num_complex::Complex64::new(0.0, 0.0));
    max_abs(&off)
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// The pointer transform of `ρ*` together with its defect measures.
pub struct PointerDiagnostics {
    pub transform: PointerTransform,
    pub rho_star: StateFn,
    pub rho_pointer: StateFn,
    pub off_diagonal: f64,
    pub unitarity: f64,
    pub eigenvalue_mismatch: f64,
}

pub fn pointer_diagnostics(rho: &StateFn, secondary: Option<&ObservableFn>) -> Result<PointerDiagnostics> {
    let rho_star = equilibrium_state(rho);
    let u = diagonalize_blocks(&rho_star, secondary)?;
    let rho_pointer = transform_state(&rho_star, &u)?;
    let (before, after) = (rho_star.blocks(), rho_pointer.blocks());
    let mut off_diagonal = 0.0f64;
    let mut eigenvalue_mismatch = 0.0f64;
    for sector in rho_star.grid().sectors() {
        let p = after.diagonal_block(sector);
        let scale = max_abs(before.diagonal_block(sector)).max(f64::MIN_POSITIVE);
        off_diagonal = off_diagonal.max(labelwise_off_diagonal(p) / scale.max(1.0));
        let diag = sorted_desc(p.diagonal().iter().map(|z| z.re).collect());
        let ev = sorted_desc(u.eigenvalues(sector).to_vec());
        let direct = sorted_desc(before.diagonal_block(sector).clone().symmetric_eigen().eigenvalues.iter().copied().collect());
        for ((a, b), c) in diag.iter().zip(&ev).zip(&direct) {
            eigenvalue_mismatch = eigenvalue_mismatch.max((a - b).abs()).max((a - c).abs());
        }
    }
    Ok(PointerDiagnostics {
        unitarity: u.unitarity_defect(),
        transform: u,
        rho_star,
        rho_pointer,
        off_diagonal,
        eigenvalue_mismatch,
    })
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// `(ρ*|O)` against `(U†ρ*U|U†OU)`.
pub fn pairing_invariance(d: &PointerDiagnostics, o: &ObservableFn) -> Result<f64> {
    let a = dual_pairing(&d.rho_star, o)?;
    let b = dual_pairing(&d.rho_pointer, &transform_observable(o, &d.transform)?)?;
    Ok((a - b).norm() / a.norm().max(1.0))
}

/// Rows `(energy, label, constant, n, value, expected)` of `(x, rr|Cⁿ)` on the
/// bound level and every `stride`-th continuum node; constant 0 is `H`, `i + 1` is `P_i`.
pub fn moment_rows(u: &PointerTransform, max_n: u32, stride: usize) -> Result<Vec<[f64; 6]>> {
    let grid = u.grid();
    let qnums = u.qnums();
    let h = transform_observable(&ObservableFn::hamiltonian(grid.clone(), qnums.clone()), u)?;
    let ps = pointer_observables(u, Basis::Pointer);
    let sectors: Vec<Sector> =
        std::iter::once(Sector::Bound).chain((0..grid.len()).step_by(stride.max(1)).map(Sector::Node)).collect();
    let mut rows = Vec::new();
    for &sector in &sectors {
        let x = grid.energy(sector);
        for r in 0..qnums.len() {
            for n in 0..=max_n {
                rows.push([x, r as f64, 0.0, n as f64, moment_check(&h, sector, r, n)?, x.powi(n as i32)]);
                for (i, p) in ps.iter().enumerate() {
                    let v = qnums.label(r)[i] as f64;
                    rows.push([x, r as f64, (i + 1) as f64, n as f64, moment_check(p, sector, r, n)?, v.powi(n as i32)]);
                }
            }
        }
    }
    Ok(rows)
}

/// Largest relative gap between ensemble moments of `H` and `P_i` and the
/// quantum values `(ρ*|Cⁿ)` for `n ≤ max_n`.
pub fn ensemble_moment_gap(ens: &ClassicalEnsemble, d: &PointerDiagnostics, max_n: u32) -> Result<f64> {
    let u = &d.transform;
    let h = ObservableFn::hamiltonian(u.grid().clone(), u.qnums().clone());
    let mut constants = vec![(Constant::Energy, h)];
    for (i, p) in pointer_observables(u, Basis::Original).into_iter().enumerate() {
        constants.push((Constant::Label(i), p));
    }
    let mut gap = 0.0f64;
    for (which, o) in &constants {
        for n in 0..=max_n {
            let classical = classical_moments(ens, *which, n)?.aggregate;
            let quantum = dual_pairing(&d.rho_star, &o.diagonal_power(n)?)?.re;
            gap = gap.max(relative(classical, quantum));
        }
    }
    Ok(gap)
}

fn ensemble_table(ens: &ClassicalEnsemble) -> Table {
    let mut header = vec!["weight".to_string(), "energy H^W".to_string(), "label index".to_string()];
    header.extend((0..ens.n_axes()).map(|i| format!("P_{i}^W")));
    let rows = ens
        .particles()
        .iter()
        .map(|p| {
            let mut row = vec![p.weight(), p.energy(), p.label() as f64];
            row.extend_from_slice(p.values());
            row
        })
        .collect();
    Table { file: "ensemble".into(), header, rows }
}

fn ensemble_checks(report: &mut Report, ens: &ClassicalEnsemble, d: &PointerDiagnostics, max_n: u32) -> Result<()> {
    report.value("ensemble_particles", ens.len() as f64);
    report.check(Check::at_least("ensemble weights non-negative", ens.min_weight(), 0.0));
    report.check(Check::at_most("ensemble total weight", (ens.total_weight() - 1.0).abs(), NORMALIZATION_TOL));
    report.check(Check::at_most("ensemble moments match", ensemble_moment_gap(ens, d, max_n)?, EXACT_TOL));
    report.tables.push(ensemble_table(ens));
    Ok(())
}

/// Pointer-basis tables and the classical ensemble.
pub fn run_pointer(cfg: &ExperimentConfig) -> Result<Report> {
    let mut s = setting(cfg)?;
    let rho = state(cfg, &mut s)?;
    let spec = cfg.pointer.clone().unwrap_or(crate::config::PointerSpec { secondary: None, max_moment: 8 });
    let secondary = spec.secondary.as_ref().map(|o| o.build(&s.grid, &s.qnums, &mut s.fixtures)).transpose()?;
    let observable =
        cfg.observable.as_ref().map(|o| o.build(&s.grid, &s.qnums, &mut s.fixtures)).transpose()?;
    let d = pointer_diagnostics(&rho, secondary.as_ref())?;
    let u = &d.transform;
    let dim = s.qnums.len();

    let mut report = Report::new("pointer", cfg.seed);
    let mut header = vec!["energy".to_string()];
    header.extend((0..dim).map(|r| format!("lambda_{r}")));
    let rows = s.grid.sectors().map(|sec| std::iter::once(s.grid.energy(sec)).chain(u.eigenvalues(sec).iter().copied()).collect()).collect();
    report.tables.push(Table { file: "eigenvalues".into(), header, rows });

    let identity_gap = s
        .grid
        .sectors()
        .map(|sec| max_abs(&(u.unitary(sec) - CMat::identity(dim, dim))))
        .fold(0.0, f64::max);
    report.value("distance_from_identity", identity_gap);
    report.value("min_tracking_overlap", u.min_overlap());
    report.check(Check::at_most("pointer off-diagonal", d.off_diagonal, EXACT_TOL));
    report.check(Check::at_most("unitarity", d.unitarity, EXACT_TOL));
    report.check(Check::at_most("eigenvalues preserved", d.eigenvalue_mismatch, EXACT_TOL));

    let moments = moment_rows(u, spec.max_moment, s.grid.len().div_ceil(MOMENT_NODES))?;
    let worst = moments.iter().map(|r| relative(r[4], r[5])).fold(0.0, f64::max);
    report.check(Check::at_most("moment identities", worst, EXACT_TOL));
    let mut mt = Table::new("moments", &["energy x", "label r", "constant (0 = H, i+1 = P_i)", "n", "(x, rr|C^n)", "expected"]);
    mt.rows = moments.into_iter().map(|r| r.to_vec()).collect();
    report.tables.push(mt);

    if let Some(o) = &observable {
        report.check(Check::at_most("pairing invariance", pairing_invariance(&d, o)?, EXACT_TOL));
        let o_ptr = transform_observable(o, u)?;
        let mut ct = Table::new("commutators", &["axis i", "Re (rho*|[P_i, O])", "Im (rho*|[P_i, O])"]);
        let mut worst = 0.0f64;
        for (i, p) in pointer_observables(u, Basis::Pointer).iter().enumerate() {
            let c = commutator_expectation(&d.rho_pointer, p, &o_ptr)?;
            worst = worst.max(c.norm());
            ct.rows.push(vec![i as f64, c.re, c.im]);
        }
        report.tables.push(ct);
        report.check(Check::at_most("commutator expectations vanish", worst, EXACT_TOL));
    }

    let ens = classical_equilibrium_density(&d.rho_pointer, u)?;
    ensemble_checks(&mut report, &ens, &d, spec.max_moment)?;
    Ok(report.finish())
}

fn packet_state(model: &DeltaWell, spec: &WignerSpec) -> Result<(StateFn, PhaseSpaceGrid)> {
    let p = spec.packet;
    let packet = model.band_limited_packet(p.q0, p.sigma, p.p0, p.half_width)?;
    let rho = StateFn::pure(Arc::new(packet.spectrum), Arc::new(QuantumNumbers::parity()), &packet.amplitudes)?;
    Ok((rho, packet.grid))
}

/// Flow residual `‖(1/ħ)[−i[H, ρ]]^W − {H^W, ρ^W}‖` for the packet family at `ħ`.
pub fn flow_residual(coupling: f64, family: &FlowFamily, q_cut: f64, hbar: f64) -> Result<f64> {
    let m = DeltaWell::with_hbar(coupling, hbar)?;
    let p = m.band_limited_packet(family.q0, family.sigma * hbar.sqrt(), family.p0, family.half_width.at(hbar))?;
    let rho = StateFn::pure(Arc::new(p.spectrum), Arc::new(QuantumNumbers::parity()), &p.amplitudes)?;
    let window = Window { q_cut, q_outer: p.grid.half_width() };
    Ok(moyal_vs_poisson(&rho, &m, &p.grid, &window)?.residual)
}

/// Product residual `‖(O₁O₂)^W − O₁^W O₂^W‖` for one pair at `ħ`.
pub fn product_residual(
    coupling: f64,
    family: &ProductFamily,
    pair: (&ObservableSpec, &ObservableSpec),
    q_cut: f64,
    hbar: f64,
) -> Result<f64> {
    let m = DeltaWell::with_hbar(coupling, hbar)?;
    let panels = (family.p_max * 2.0 * family.half_width / (4.0 * hbar)).ceil() as usize;
    let sg = Arc::new(m.momentum_grid(0.5 * family.p_max * family.p_max, panels, 16)?);
    let q = Arc::new(QuantumNumbers::parity());
    let grid = PhaseSpaceGrid::with_spacing(family.half_width, 0.99 * PI / 4.0 * hbar / family.p_max, hbar)?;
    let mut fx = Fixtures::new(0);
    let o1 = pair.0.build(&sg, &q, &mut fx)?;
    let window = Window { q_cut, q_outer: family.q_outer };
    if pair.0 == pair.1 {
        return product_correspondence(&o1, &o1, &m, &grid, &window);
    }
    let o2 = pair.1.build(&sg, &q, &mut fx)?;
    product_correspondence(&o1, &o2, &m, &grid, &window)
}

/// Every family in `scaling`, labelled `flow` or `product k`.
pub fn scaling_reports(coupling: f64, scaling: &ScalingSpec) -> Result<Vec<(String, ScalingReport)>> {
    let mut out = Vec::new();
    if let Some(f) = &scaling.flow {
        out.push(("flow".to_string(), hbar_scaling(&scaling.hbars, |h| flow_residual(coupling, f, scaling.q_cut, h))?));
    }
    if let Some(p) = &scaling.products {
        for (k, pair) in p.pairs.iter().enumerate() {
            let r = hbar_scaling(&scaling.hbars, |h| product_residual(coupling, p, (&pair.left, &pair.right), scaling.q_cut, h))?;
            out.push((format!("product {k}"), r));
        }
    }
    Ok(out)
}

/// Phase-space tables for the configured packet, plus the `ħ`-scaling fits.
pub fn run_wigner(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.wigner.as_ref().ok_or_else(|| missing("wigner"))?;
    let max_n = cfg.pointer.as_ref().map_or(8, |p| p.max_moment);
    let model = DeltaWell::with_hbar(spec.coupling, spec.hbar)?;
    let (rho, grid) = packet_state(&model, spec)?;
    let kernel = position_kernel(&rho, &model, &grid)?;
    let w = wigner_state(&kernel)?;

    let mut report = Report::new("wigner", cfg.seed);
    report.value("grid_points", grid.len() as f64);
    report.value("dq", grid.dq());
    report.value("dp", grid.dp());
    report.value("kernel_trace", kernel.trace());
    report.value("kernel_boundary_decay", kernel.boundary_decay());
    report.check(Check::at_most("normalization of rho^W", (w.normalization() - 1.0).abs(), WIGNER_NORMALIZATION_TOL));
    report.check(Check::at_most("realness of rho^W", w.imag_residue(), REALNESS_TOL));
    report.check(Check::at_most("kernel hermiticity", kernel.hermiticity_defect(), REALNESS_TOL));

    let mut density = Table::new("wigner", &["q", "p", "rho^W(q, p)"]);
    let vals = w.values();
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            density.rows.push(vec![grid.q(i), grid.p(j), vals[(i, j)]]);
        }
    }
    report.tables.push(density);

    let mut fx = Fixtures::new(cfg.seed);
    let mut pairings = Table::new("pairings", &["observable", "(rho|O)", "integral rho^W O^W", "difference"]);
    let mut worst = 0.0f64;
    for (k, spec_o) in spec.observables.iter().enumerate() {
        let o = spec_o.build(rho.grid(), rho.qnums(), &mut fx)?;
        let quantum = dual_pairing(&rho, &o)?.re;
        let classical = phase_space_pairing(&w, &wigner_observable(&o, &model, &grid)?)?;
        worst = worst.max((quantum - classical).abs());
        pairings.rows.push(vec![k as f64, quantum, classical, quantum - classical]);
    }
    if !spec.observables.is_empty() {
        report.check(Check::at_most("phase-space pairing", worst, PAIRING_TOL));
    }
    report.tables.push(pairings);

    let d = pointer_diagnostics(&rho, None)?;
    let ens = classical_equilibrium_density(&d.rho_pointer, &d.transform)?;
    ensemble_checks(&mut report, &ens, &d, max_n)?;
    let lo = rho.grid().omega0() - 4.0 * spec.smearing;
    let hi = rho.grid().omega_max() + 4.0 * spec.smearing;
    let xs: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).collect();
    let dens = ens.mollified_energy_density(&xs, spec.smearing)?;
    let mut et = Table::new("energy_density", &["energy", "smeared density of H^W"]);
    et.rows = xs.iter().zip(&dens).map(|(&x, &v)| vec![x, v]).collect();
    report.tables.push(et);

    if let Some(scaling) = &spec.scaling {
        let mut st = Table::new("scaling", &["family", "hbar", "residual", "fitted slope"]);
        for (k, (name, r)) in scaling_reports(spec.coupling, scaling)?.into_iter().enumerate() {
            for (&h, &res) in r.hbars.iter().zip(&r.residuals) {
                st.rows.push(vec![k as f64, h, res, r.slope]);
            }
            report.value(&format!("slope {name}"), r.slope);
            report.check(Check::at_least(format!("{name} residual slope"), r.slope, MIN_SLOPE));
        }
        report.tables.push(st);
    }
    Ok(report.finish())
}

/// Seeded property suite over random states and observables.
pub fn run_check(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.check.clone().unwrap_or(crate::config::CheckSpec { cases: 20, break_hermiticity: 0.0 });
    let (grid, qnums) = match &cfg.spectrum {
        Some(s) => s.build()?,
        None => (Arc::new(SpectrumGrid::new(-1.0, 20.0, 6, 8)?), Arc::new(QuantumNumbers::parity())),
    };
    let mut fx = Fixtures::new(cfg.seed);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut bump = |k: &'static str, v: f64| {
        let e = worst.entry(k).or_insert(0.0);
        *e = e.max(v);
    };
    for case in 0..spec.cases {
        let rho = fx.aligned_state(&grid, &qnums)?;
        let mut o = fx.observable(&grid, &qnums)?;
        if case == 0 && spec.break_hermiticity > 0.0 {
            let mut b = o.blocks().clone();
            b.bound[(0, 0)] += num_complex::Complex64::new(0.0, spec.break_hermiticity);
            o = o.with_blocks(b)?;
        }
        let v = rho.validate();
        bump("state hermiticity", v.hermiticity_defect);
        bump("state normalization", v.normalization_defect);
        bump("observable hermiticity", o.self_adjoint_defect());

        let star = equilibrium_state(&rho);
        let drift = evolve_state(&star, 1.0 + case as f64).blocks() != star.blocks();
        bump("equilibrium is stationary", if drift { 1.0 } else { 0.0 });
        bump("liouvillian annihilates equilibrium", if liouvillian_apply(&star).is_zero() { 0.0 } else { 1.0 });
        let t0 = dual_pairing(&rho, &o)?.re - dual_pairing(&evolve_state(&rho, 0.0), &o)?.re;
        bump("evolution at t = 0", t0.abs());

        let d = pointer_diagnostics(&rho, None)?;
        bump("pointer off-diagonal", d.off_diagonal);
        bump("unitarity", d.unitarity);
        bump("eigenvalues preserved", d.eigenvalue_mismatch);
        bump("pairing invariance", pairing_invariance(&d, &o)?);
        let o_ptr = transform_observable(&o, &d.transform)?;
        for p in pointer_observables(&d.transform, Basis::Pointer) {
            bump("commutator expectations vanish", commutator_expectation(&d.rho_pointer, &p, &o_ptr)?.norm());
        }
        if case < 3 {
            let m = moment_rows(&d.transform, 8, 1)?.iter().map(|r| relative(r[4], r[5])).fold(0.0, f64::max);
            bump("moment identities", m);
        }
        let ens = classical_equilibrium_density(&d.rho_pointer, &d.transform)?;
        bump("ensemble negativity", (-ens.min_weight()).max(0.0));
        bump("ensemble total weight", (ens.total_weight() - 1.0).abs());
        bump("ensemble moments match", ensemble_moment_gap(&ens, &d, 8)?);
    }

    let limits: [(&str, f64); 15] = [
        ("state hermiticity", HERMITICITY_TOL),
        ("state normalization", NORMALIZATION_TOL),
        ("observable hermiticity", HERMITICITY_TOL),
        ("equilibrium is stationary", 0.0),
        ("liouvillian annihilates equilibrium", 0.0),
        ("evolution at t = 0", EXACT_TOL),
        ("pointer off-diagonal", EXACT_TOL),
        ("unitarity", EXACT_TOL),
        ("eigenvalues preserved", EXACT_TOL),
        ("pairing invariance", EXACT_TOL),
        ("commutator expectations vanish", EXACT_TOL),
        ("moment identities", EXACT_TOL),
        ("ensemble negativity", 0.0),
        ("ensemble total weight", NORMALIZATION_TOL),
        ("ensemble moments match", EXACT_TOL),
    ];
    let mut report = Report::new("check", cfg.seed);
    report.value("cases", spec.cases as f64);
    for (name, limit) in limits {
        report.check(Check::at_most(name, worst.get(name).copied().unwrap_or(0.0), limit));
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    const DIAGONAL: &str = r#"
[spectrum]
omega0 = -1.0
omega_max = 20.0
panels = 4
order = 8
labels = "parity"

[state]
kind = "energy_diagonal"
bound = [0.3, 0.1]
profiles = [{ kind = "gaussian", center = 6.0, width = 2.0 }, { kind = "gaussian", center = 6.0, width = 2.0, amplitude = 0.5 }]

[observable]
kind = "random"

[evolve]
times = { kind = "list", values = [0.0, 1.0, 5.0] }
dyadic = { t0 = 1.0, levels = 3, samples = 8 }
"#;

    #[test]
    fn energy_diagonal_state_has_no_deficit_and_identity_pointer() {
        let c = cfg(DIAGONAL);
        let e = run_evolve(&c).unwrap();
        assert!(e.passed);
        assert!(e.table("decay").unwrap().rows.iter().all(|r| r[3] == 0.0));
        let p = run_pointer(&c).unwrap();
        assert!(p.passed, "{:?}", p.failures().collect::<Vec<_>>());
        assert_eq!(p.values["distance_from_identity"], 0.0);
    }

    #[test]
    fn moment_table_has_the_cube_of_the_energy() {
        let c = cfg(DIAGONAL);
        let mut s = setting(&c).unwrap();
        let rho = state(&c, &mut s).unwrap();
        let d = pointer_diagnostics(&rho, None).unwrap();
        let rows = moment_rows(&d.transform, 3, 1).unwrap();
        let row = rows.iter().find(|r| r[2] == 0.0 && r[3] == 3.0 && r[0] > 0.0).unwrap();
        assert_eq!(row[4], row[0].powi(3));
    }

    #[test]
    fn check_suite_passes_and_notices_a_broken_observable() {
        let good = cfg("seed = 3\n[check]\ncases = 4\n");
        let r = run_check(&good).unwrap();
        assert!(r.passed, "{:?}", r.failures().collect::<Vec<_>>());
        let bad = cfg("seed = 3\n[check]\ncases = 4\nbreak_hermiticity = 1e-3\n");
        let r = run_check(&bad).unwrap();
        let names: Vec<_> = r.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["observable hermiticity"]);
    }

    #[test]
    fn missing_sections_are_config_errors() {
        let c = cfg("seed = 1\n");
        assert!(matches!(run_evolve(&c), Err(Error::Config(_))));
        assert!(matches!(run_wigner(&c), Err(Error::Config(_))));
    }
}
