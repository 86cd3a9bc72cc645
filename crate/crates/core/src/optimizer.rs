//! Genetic-algorithm synthesis of the six transformer-line parameters
//! against band-wide performance masks.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{solve_operating_point, Excitation, OperatingSettings, Port, SurfaceSet, SwitchDesign};
use crate::surface::fmt_f64;
use crate::sweep::sweep_points;
use crate::units::{Frequency, PowerLevel};

/// Electrical lengths (degrees at the lines' reference frequency) and
/// characteristic impedances (Ω) of the three transformers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

impl DesignVector {
    pub fn from_design(d: &SwitchDesign) -> Self {
        DesignVector {
            theta1: d.it1.theta_ref_deg,
            theta2: d.it2.theta_ref_deg,
            theta3: d.it3.theta_ref_deg,
            z1: d.it1.z0,
            z2: d.it2.z0,
            z3: d.it3.z0,
        }
    }

    /// `[θ1, θ2, θ3, Z1, Z2, Z3]`.
    pub fn genes(&self) -> [f64; 6] {
        [self.theta1, self.theta2, self.theta3, self.z1, self.z2, self.z3]
    }

    pub fn from_genes(g: [f64; 6]) -> Self {
        DesignVector {
            theta1: g[0],
            theta2: g[1],
            theta3: g[2],
            z1: g[3],
            z2: g[4],
            z3: g[5],
        }
    }

    /// `base` with this vector's line parameters.
    pub fn apply(&self, base: &SwitchDesign) -> SwitchDesign {
        base.with_lines([self.theta1, self.theta2, self.theta3], [self.z1, self.z2, self.z3])
    }
}

/// Box bounds shared by the three lengths and by the three impedances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bounds {
    pub theta_deg: [f64; 2],
    pub z0_ohm: [f64; 2],
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            theta_deg: [10.0, 120.0],
            z0_ohm: [30.0, 120.0],
        }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        let [tl, th] = self.theta_deg;
        if !(tl > 0.0 && tl < th && th < 180.0) {
            return Err(Error::config("bounds.theta_deg", "need 0 < lower < upper < 180"));
        }
        let [zl, zh] = self.z0_ohm;
        if !(zl > 0.0 && zl < zh && zh.is_finite()) {
            return Err(Error::config("bounds.z0_ohm", "need 0 < lower < upper"));
        }
        Ok(())
    }

    fn gene_range(&self, i: usize) -> [f64; 2] {
        if i < 3 {
            self.theta_deg
        } else {
            self.z0_ohm
        }
    }

    pub fn contains(&self, v: &DesignVector) -> bool {
        v.genes().iter().enumerate().all(|(i, &g)| {
            let [lo, hi] = self.gene_range(i);
            g >= lo && g <= hi
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DesignVector {
        DesignVector::from_genes(std::array::from_fn(|i| {
            let [lo, hi] = self.gene_range(i);
            rng.gen_range(lo..=hi)
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub il_rx: f64,
    pub il_tx: f64,
    pub isolation: f64,
    pub return_loss: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            il_rx: 1.0,
            il_tx: 1.0,
            isolation: 1.0,
            return_loss: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Targets {
    pub il_rx_db: f64,
    pub il_tx_db: f64,
    pub isolation_db: f64,
    pub return_loss_db: f64,
}

impl Default for Targets {
    fn default() -> Self {
        Targets {
            il_rx_db: 1.0,
            il_tx_db: 1.0,
            isolation_db: 15.0,
            return_loss_db: 10.0,
        }
    }
}

/// Band, probe levels and hinge targets of the synthesis objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Objective {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points: usize,
    /// Antenna-side drive that must leave the switch in Rx mode.
    pub rx_probe_dbm: f64,
    /// Transmitter drive that must leave the switch in Tx mode.
    pub tx_probe_dbm: f64,
    pub weights: Weights,
    pub targets: Targets,
    /// Score of a design whose operating point cannot be solved.
    pub penalty: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            f_start_hz: 0.8e9,
            f_stop_hz: 1.3e9,
            points: 11,
            rx_probe_dbm: -30.0,
            tx_probe_dbm: 30.0,
            weights: Weights::default(),
            targets: Targets::default(),
            penalty: 1e3,
        }
    }
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_start_hz > 0.0 && self.f_start_hz <= self.f_stop_hz && self.f_stop_hz.is_finite()) {
            return Err(Error::config("objective.f_start_hz", "need 0 < f_start_hz <= f_stop_hz"));
        }
        if self.points == 0 {
            return Err(Error::config("objective.points", "must be >= 1"));
        }
        let w = [self.weights.il_rx, self.weights.il_tx, self.weights.isolation, self.weights.return_loss];
        if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::config("objective.weights", "must be finite and >= 0"));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(Error::config("objective.weights", "must not all be zero"));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::config("objective.penalty", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        sweep_points(self.f_start_hz, self.f_stop_hz, self.points)
    }
}

/// Everything held fixed while the lines vary.
#[derive(Debug, Clone)]
pub struct Problem {
    /// NCs, port impedance, stub placement and line reference frequencies.
    pub base: SwitchDesign,
    pub surfaces: SurfaceSet,
    pub operating: OperatingSettings,
}

/// Worst value of each figure of merit over the band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandMetrics {
    pub il_rx_db: f64,
    pub il_tx_db: f64,
    /// Tx → Rx loss, worst of the two probed states.
    pub isolation_db: f64,
    pub return_loss_db: f64,
}

impl BandMetrics {
    pub fn score(&self, obj: &Objective) -> f64 {
        let (w, t) = (&obj.weights, &obj.targets);
        let hinge = |x: f64| x.max(0.0);
        let s = w.il_rx * hinge(self.il_rx_db - t.il_rx_db)
            + w.il_tx * hinge(self.il_tx_db - t.il_tx_db)
            + w.isolation * hinge(t.isolation_db - self.isolation_db)
            + w.return_loss * hinge(t.return_loss_db - self.return_loss_db);
        if s.is_finite() {
            s
        } else {
            obj.penalty
        }
    }
}

/// Probes `design` at every band frequency: Rx state under antenna drive at
/// `rx_probe_dbm`, Tx state under transmitter drive at `tx_probe_dbm`.
pub fn band_metrics(design: &SwitchDesign, obj: &Objective, problem: &Problem) -> Result<BandMetrics> {
    let mut m = BandMetrics {
        il_rx_db: f64::NEG_INFINITY,
        il_tx_db: f64::NEG_INFINITY,
        isolation_db: f64::INFINITY,
        return_loss_db: f64::INFINITY,
    };
    let probe = |port, dbm| Excitation {
        port,
        power: PowerLevel::from_dbm(dbm),
    };
    for f in obj.frequencies() {
        let f = Frequency::new(f)?;
        let rx = solve_operating_point(design, &problem.surfaces, f, probe(Port::Ant, obj.rx_probe_dbm), &problem.operating)?;
        let tx = solve_operating_point(design, &problem.surfaces, f, probe(Port::Tx, obj.tx_probe_dbm), &problem.operating)?;
        m.il_rx_db = m.il_rx_db.max(rx.loss_db(Port::Rx, Port::Ant)?);
        m.return_loss_db = m.return_loss_db.min(rx.return_loss_db(Port::Ant)?);
        m.il_tx_db = m.il_tx_db.max(tx.loss_db(Port::Ant, Port::Tx)?);
        m.isolation_db = m
            .isolation_db
            .min(rx.loss_db(Port::Rx, Port::Tx)?)
            .min(tx.loss_db(Port::Rx, Port::Tx)?);
    }
    Ok(m)
}

/// Weighted hinge score of `v` (0 when every target is met, lower is
/// better). Unsolvable designs score `obj.penalty`.
pub fn evaluate_objective(v: &DesignVector, obj: &Objective, problem: &Problem) -> f64 {
    let design = v.apply(&problem.base);
    if design.validate().is_err() {
        return obj.penalty;
    }
    match band_metrics(&design, obj, problem) {
        Ok(m) => m.score(obj).min(obj.penalty),
        Err(_) => obj.penalty,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of the gene's bound width.
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub seed: u64,
    pub bounds: Bounds,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 32,
            generations: 40,
            tournament: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            mutation_sigma: 0.05,
            elitism: 2,
            seed: 1,
            bounds: Bounds::default(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.population < 1 {
            return Err(Error::config("ga.population", "must be >= 1"));
        }
        if self.elitism < 1 || self.elitism > self.population {
            return Err(Error::config("ga.elitism", "must lie in [1, population]"));
        }
        if self.tournament < 1 {
            return Err(Error::config("ga.tournament", "must be >= 1"));
        }
        for (name, r) in [("ga.crossover_rate", self.crossover_rate), ("ga.mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        if !(self.mutation_sigma > 0.0 && self.mutation_sigma.is_finite()) {
            return Err(Error::config("ga.mutation_sigma", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_score: f64,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaReport {
    pub best: DesignVector,
    pub best_score: f64,
    /// Generation 0 is the random initial population.
    pub trace: Vec<GenerationStats>,
    pub evaluations: usize,
}

impl GaReport {
    /// `generation,best_score,mean_score` with 17 significant digits.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let wrap = |e: csv::Error| Error::Precondition(format!("csv write failed: {e}"));
        w.write_record(["generation", "best_score", "mean_score"]).map_err(wrap)?;
        for g in &self.trace {
            w.write_record([g.generation.to_string(), fmt_f64(g.best_score), fmt_f64(g.mean_score)])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Independent generator for one (generation, individual) slot, so the
/// run does not depend on evaluation order or thread count.
fn slot_rng(seed: u64, generation: usize, individual: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | individual as u64);
    rng
}

/// Index order by ascending score, ties broken by position.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx
}

fn tournament<R: Rng>(rng: &mut R, scores: &[f64], k: usize) -> usize {
    let mut best = rng.gen_range(0..scores.len());
    for _ in 1..k {
        let c = rng.gen_range(0..scores.len());
        if scores[c] < scores[best] || (scores[c] == scores[best] && c < best) {
            best = c;
        }
    }
    best
}

fn breed<R: Rng>(rng: &mut R, cfg: &GaConfig, pop: &[DesignVector], scores: &[f64]) -> DesignVector {
    let a = pop[tournament(rng, scores, cfg.tournament)].genes();
    let b = pop[tournament(rng, scores, cfg.tournament)].genes();
    let cross = rng.gen_bool(cfg.crossover_rate);
    let mut g = a;
    for (i, gene) in g.iter_mut().enumerate() {
        if cross && rng.gen_bool(0.5) {
            *gene = b[i];
        }
        if rng.gen_bool(cfg.mutation_rate) {
            let [lo, hi] = cfg.bounds.gene_range(i);
            let n = Normal::new(0.0, cfg.mutation_sigma * (hi - lo)).expect("positive sigma");
            *gene = (*gene + n.sample(rng)).clamp(lo, hi);
        }
    }
    DesignVector::from_genes(g)
}

fn stats(generation: usize, scores: &[f64]) -> GenerationStats {
    // Summed in sorted order so the mean does not depend on slot order.
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    GenerationStats {
        generation,
        best_score: s[0],
        mean_score: s.iter().sum::<f64>() / s.len() as f64,
    }
}

/// Minimizes [`evaluate_objective`] with tournament selection, uniform
/// crossover, clamped Gaussian mutation and elitism.
pub fn ga_optimize(cfg: &GaConfig, obj: &Objective, problem: &Problem) -> Result<GaReport> {
    cfg.validate()?;
    obj.validate()?;
    let eval = |v: &DesignVector| evaluate_objective(v, obj, problem);

    let mut pop: Vec<DesignVector> = (0..cfg.population)
        .map(|i| cfg.bounds.sample(&mut slot_rng(cfg.seed, 0, i)))
        .collect();
    let mut scores: Vec<f64> = pop.par_iter().map(eval).collect();
    let mut evaluations = pop.len();
    let mut trace = vec![stats(0, &scores)];

    for gen in 1..=cfg.generations {
        let order = ranking(&scores);
        let children: Vec<DesignVector> = (cfg.elitism..cfg.population)
            .map(|i| breed(&mut slot_rng(cfg.seed, gen, i), cfg, &pop, &scores))
            .collect();
        let child_scores: Vec<f64> = children.par_iter().map(eval).collect();
        evaluations += children.len();

        let mut next_pop: Vec<DesignVector> = order[..cfg.elitism].iter().map(|&i| pop[i]).collect();
        let mut next_scores: Vec<f64> = order[..cfg.elitism].iter().map(|&i| scores[i]).collect();
        next_pop.extend(children);
        next_scores.extend(child_scores);
        pop = next_pop;
        scores = next_scores;
        trace.push(stats(gen, &scores));
    }

    let best = ranking(&scores)[0];
    Ok(GaReport {
        best: pop[best],
        best_score: scores[best],
        trace,
        evaluations,
    })
}

/// `n` designs drawn uniformly from `bounds`.
pub fn random_designs(bounds: &Bounds, n: usize, seed: u64) -> Vec<DesignVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| bounds.sample(&mut rng)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_surface, NonlinearCircuit, SolverSettings};
    use crate::units::make_grid;
    use std::sync::OnceLock;

    fn problem() -> &'static Problem {
        static P: OnceLock<Problem> = OnceLock::new();
        P.get_or_init(|| {
            let grid = make_grid(0.7e9, 1.4e9, 8, -40.0, 40.0, 21).unwrap();
            let s = build_surface(&NonlinearCircuit::default(), &grid, &SolverSettings::default()).unwrap();
            Problem {
                base: SwitchDesign::default(),
                surfaces: SurfaceSet::uniform(s),
                operating: OperatingSettings::default(),
            }
        })
    }

    fn small_objective() -> Objective {
        Objective {
            points: 3,
            ..Default::default()
        }
    }

    fn reference_design() -> DesignVector {
        DesignVector::from_design(&SwitchDesign::default())
    }

    #[test]
    fn genes_round_trip() {
        let v = reference_design();
        assert_eq!(v.genes(), [28.0, 86.0, 25.0, 89.0, 97.0, 84.0]);
        assert_eq!(DesignVector::from_genes(v.genes()), v);
        assert_eq!(v.apply(&SwitchDesign::default()), SwitchDesign::default());
    }

    #[test]
    fn hinge_is_zero_when_targets_met() {
        let obj = Objective::default();
        let m = BandMetrics {
            il_rx_db: 0.5,
            il_tx_db: 0.9,
            isolation_db: 20.0,
            return_loss_db: 12.0,
        };
        assert_eq!(m.score(&obj), 0.0);
        let worse = BandMetrics {
            il_rx_db: 1.5,
            isolation_db: 13.0,
            ..m
        };
        assert!((worse.score(&obj) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn near_open_branch_scores_worse_than_reference() {
        let obj = small_objective();
        let reference = evaluate_objective(&reference_design(), &obj, problem());
        assert!(reference.is_finite() && reference < obj.penalty);
        let open = DesignVector {
            theta1: 179.9,
            ..reference_design()
        };
        assert!(evaluate_objective(&open, &obj, problem()) > reference);
    }

    #[test]
    fn out_of_range_probe_is_penalised() {
        let obj = Objective {
            tx_probe_dbm: 60.0,
            ..small_objective()
        };
        assert_eq!(evaluate_objective(&reference_design(), &obj, problem()), obj.penalty);
    }

    #[test]
    fn weights_must_not_all_vanish() {
        let obj = Objective {
            weights: Weights {
                il_rx: 0.0,
                il_tx: 0.0,
                isolation: 0.0,
                return_loss: 0.0,
            },
            ..Default::default()
        };
        assert!(matches!(obj.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn config_validation() {
        let ok = GaConfig::default();
        assert!(ok.validate().is_ok());
        assert!(GaConfig { elitism: 0, ..ok }.validate().is_err());
        assert!(GaConfig { elitism: 33, ..ok }.validate().is_err());
        assert!(GaConfig { crossover_rate: 1.5, ..ok }.validate().is_err());
        assert!(GaConfig { elitism: 32, ..ok }.validate().is_ok());
    }

    fn tiny_ga() -> GaConfig {
        GaConfig {
            population: 8,
            generations: 4,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn fixed_seed_is_reproducible_and_elitist() {
        let obj = small_objective();
        let a = ga_optimize(&tiny_ga(), &obj, problem()).unwrap();
        let b = ga_optimize(&tiny_ga(), &obj, problem()).unwrap();
        assert_eq!(a, b);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_trace_csv(&mut ca).unwrap();
        b.write_trace_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.trace.len(), 5);
        assert_eq!(a.evaluations, 8 + 4 * 6);
        assert!(a.trace.windows(2).all(|w| w[1].best_score <= w[0].best_score));
        assert!(tiny_ga().bounds.contains(&a.best));
        assert_eq!(a.best_score, a.trace.last().unwrap().best_score);
    }

    #[test]
    fn full_elitism_freezes_population() {
        let cfg = GaConfig {
            elitism: 8,
            ..tiny_ga()
        };
        let r = ga_optimize(&cfg, &small_objective(), problem()).unwrap();
        assert_eq!(r.evaluations, 8);
        assert!(r.trace.iter().all(|g| g.best_score == r.trace[0].best_score));
        assert!(r.trace.iter().all(|g| g.mean_score == r.trace[0].mean_score));
    }

    #[test]
    fn random_designs_respect_bounds() {
        let b = Bounds::default();
        let v = random_designs(&b, 200, 3);
        assert_eq!(v.len(), 200);
        assert!(v.iter().all(|d| b.contains(d)));
        assert_eq!(v, random_designs(&b, 200, 3));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn mutation_stays_in_bounds(seed in 0u64..10_000, sigma in 0.01f64..3.0) {
            let cfg = GaConfig { mutation_rate: 1.0, mutation_sigma: sigma, ..Default::default() };
            let pop = random_designs(&cfg.bounds, 6, seed);
            let scores = vec![1.0; 6];
            let mut rng = slot_rng(seed, 1, 0);
            for _ in 0..20 {
                let child = breed(&mut rng, &cfg, &pop, &scores);
                proptest::prop_assert!(cfg.bounds.contains(&child));
            }
        }
    }
}
