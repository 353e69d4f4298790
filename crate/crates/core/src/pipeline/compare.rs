//! Comparison of simulated figures of merit against the published
//! experimental values.
//!
//! The experimental endpoints depend on an efficiency budget that was never
//! published, so they are only compared after fitting two transmissivities
//! (before and after the teleportation channel) and are then flagged as
//! fitted. Quantities that follow from the published source composition
//! alone are compared as predictions.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelSpec};
use crate::entanglement::log_negativity;
use crate::postselect::summarize;
use crate::state_prep::{split_photon, Impurity, SplitPhotonSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    /// Log-negativity of the initial split-photon state.
    #[serde(rename = "E_AB")]
    EAb,
    /// Log-negativity of the swapped state.
    #[serde(rename = "E_AD")]
    EAd,
    #[serde(rename = "P")]
    P,
    #[serde(rename = "E_ps")]
    EPs,
    #[serde(rename = "S")]
    S,
    #[serde(rename = "F_av")]
    FAv,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::EAb => "E_AB",
            Quantity::EAd => "E_AD",
            Quantity::P => "P",
            Quantity::EPs => "E_ps",
            Quantity::S => "S",
            Quantity::FAv => "F_av",
        }
    }
}

/// Where a quantity was evaluated: beam-splitter reflectivity and, for
/// swapped states, the channel setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub reflectivity: f64,
    pub r: Option<f64>,
    pub g: Option<f64>,
}

impl Context {
    pub fn initial(reflectivity: f64) -> Self {
        Self { reflectivity, r: None, g: None }
    }

    pub fn swapped(reflectivity: f64, r: f64, g: f64) -> Self {
        Self { reflectivity, r: Some(r), g: Some(g) }
    }

    fn matches(&self, other: &Context) -> bool {
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-9,
            (None, None) => true,
            _ => false,
        };
        (self.reflectivity - other.reflectivity).abs() < 1e-9 && close(self.r, other.r) && close(self.g, other.g)
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R={}", self.reflectivity)?;
        if let (Some(r), Some(g)) = (self.r, self.g) {
            write!(f, ", r={r}, g={g}")?;
        }
        Ok(())
    }
}

/// What a reference value needs from the model before it can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    /// The published source composition.
    SourceModel,
    /// Source weights fitted to this very value.
    SourceFit,
    /// The two-transmissivity loss fit.
    LossFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub quantity: Quantity,
    pub context: Context,
    pub value: f64,
    pub uncertainty: f64,
    /// Accepted |simulated − value|.
    pub band: f64,
    pub requires: Requirement,
}

fn reference(quantity: Quantity, context: Context, value: f64, uncertainty: f64, band: f64, requires: Requirement) -> ReferenceValue {
    ReferenceValue { quantity, context, value, uncertainty, band, requires }
}

/// Measured composition of the R = 0.5 source.
pub fn measured_impurity() -> Impurity {
    Impurity::new(0.806, 0.183, 0.011)
}

/// Channel settings of the two swapped-state measurements.
pub const MEASURED_SETTINGS: [(f64, f64); 2] = [(0.71, 0.63), (1.01, 0.79)];

/// Published values with their printed uncertainties. The initial-state
/// value at R = 0.5 is a prediction from the measured composition and gets
/// a ±0.02 band; everything else is compared within its uncertainty.
pub fn reference_table() -> Vec<ReferenceValue> {
    use Quantity::*;
    use Requirement::*;
    let [(r1, g1), (r2, g2)] = MEASURED_SETTINGS;
    let mut t = vec![
        reference(EAb, Context::initial(0.5), 0.71, 0.01, 0.02, SourceModel),
        reference(EAd, Context::swapped(0.5, r2, g2), 0.28, 0.01, 0.01, LossFit),
        reference(EAb, Context::initial(0.67), 0.64, 0.01, 0.01, SourceFit),
    ];
    let endpoints: [(f64, [(Quantity, f64, f64); 4], [(Quantity, f64, f64); 4]); 2] = [
        (
            0.5,
            [(P, 0.125, 0.002), (EPs, 0.67, 0.02), (S, 2.08, 0.05), (FAv, 0.86, 0.01)],
            [(P, 0.160, 0.003), (EPs, 0.75, 0.02), (S, 2.21, 0.05), (FAv, 0.89, 0.01)],
        ),
        (
            0.67,
            [(P, 0.103, 0.002), (EPs, 0.70, 0.04), (S, 2.11, 0.08), (FAv, 0.87, 0.01)],
            [(P, 0.134, 0.003), (EPs, 0.77, 0.02), (S, 2.26, 0.04), (FAv, 0.90, 0.01)],
        ),
    ];
    for (refl, first, second) in endpoints {
        for (q, v, u) in first {
            t.push(reference(q, Context::swapped(refl, r1, g1), v, u, u, LossFit));
        }
        for (q, v, u) in second {
            t.push(reference(q, Context::swapped(refl, r2, g2), v, u, u, LossFit));
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceModel {
    /// Pure split photon.
    Ideal,
    Measured,
    Fitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModel {
    None,
    /// Transmissivities set by hand.
    Manual { pre_loss: f64, post_loss: f64 },
    Fitted { pre_loss: f64, post_loss: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub source: SourceModel,
    pub losses: LossModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedValue {
    pub quantity: Quantity,
    pub context: Context,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedValues {
    pub model: ModelInfo,
    pub values: Vec<SimulatedValue>,
}

impl SimulatedValues {
    fn get(&self, q: Quantity, c: &Context) -> Option<f64> {
        self.values.iter().find(|v| v.quantity == q && v.context.matches(c)).map(|v| v.value)
    }

    pub fn covers(&self, r: &ReferenceValue) -> bool {
        self.get(r.quantity, &r.context).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    FittedPass,
    FittedFail,
    NotComparable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::FittedPass => "fitted: within band",
            Status::FittedFail => "fitted: outside band",
            Status::NotComparable => "not directly comparable (imperfection fit required)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: Quantity,
    pub context: Context,
    pub paper: f64,
    pub uncertainty: f64,
    pub band: f64,
    pub simulated: f64,
    pub deviation: f64,
    pub fitted: bool,
    pub status: Status,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model: ModelInfo,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Rows that were actually checked against a band.
    pub fn asserted(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(|r| r.status != Status::NotComparable)
    }
}

/// Compares every reference row against the simulated values. Rows whose
/// requirement the model does not meet are reported as not directly
/// comparable and never asserted.
pub fn compare_to_paper(sim: &SimulatedValues, table: &[ReferenceValue]) -> Result<ComparisonReport> {
    let rows = table
        .iter()
        .map(|r| {
            let simulated = sim
                .get(r.quantity, &r.context)
                .ok_or_else(|| Error::MissingQuantity(format!("{} at {}", r.quantity.name(), r.context)))?;
            let deviation = simulated - r.value;
            let within = deviation.abs() <= r.band;
            let (comparable, fitted) = match r.requires {
                Requirement::SourceModel => (sim.model.source != SourceModel::Ideal, sim.model.source == SourceModel::Fitted),
                Requirement::SourceFit => (sim.model.source == SourceModel::Fitted, true),
                Requirement::LossFit => (
                    sim.model.source != SourceModel::Ideal && matches!(sim.model.losses, LossModel::Fitted { .. }),
                    true,
                ),
            };
            let status = match (comparable, fitted, within) {
                (false, _, _) => Status::NotComparable,
                (true, false, true) => Status::Pass,
                (true, false, false) => Status::Fail,
                (true, true, true) => Status::FittedPass,
                (true, true, false) => Status::FittedFail,
            };
            Ok(ComparisonRow {
                quantity: r.quantity,
                context: r.context,
                paper: r.value,
                uncertainty: r.uncertainty,
                band: r.band,
                simulated,
                deviation,
                fitted: comparable && fitted,
                status,
                verdict: status.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport { model: sim.model, rows })
}

/// `E_AD, P, E_ps, S, F_av` of the swapped state for one channel setting.
pub fn swapped_values(split: &SplitPhotonSpec, channel: &ChannelSpec, cutoff: usize) -> Result<Vec<SimulatedValue>> {
    let input = split_photon(split, cutoff)?;
    let out = apply_channel(&input, 1, channel)?;
    let ctx = Context::swapped(split.reflectivity, channel.r, channel.g);
    let e = log_negativity(&out, &[0])?.log_negativity;
    let s = summarize(&out)?;
    Ok([(Quantity::EAd, e), (Quantity::P, s.p), (Quantity::EPs, s.e_ps), (Quantity::S, s.s), (Quantity::FAv, s.f_av)]
        .into_iter()
        .map(|(quantity, value)| SimulatedValue { quantity, context: ctx, value })
        .collect())
}

pub fn initial_value(split: &SplitPhotonSpec, cutoff: usize) -> Result<SimulatedValue> {
    let rho = split_photon(split, cutoff)?;
    Ok(SimulatedValue {
        quantity: Quantity::EAb,
        context: Context::initial(split.reflectivity),
        value: log_negativity(&rho, &[0])?.log_negativity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossFit {
    pub reflectivity: f64,
    pub pre_loss: f64,
    pub post_loss: f64,
    /// `Σ ((simulated − reference)/uncertainty)²` over the fitted rows.
    pub chi2: f64,
    pub terms: usize,
}

/// Transmissivity grid bounds for the loss fit.
const FIT_RANGE: (f64, f64) = (0.05, 1.0);

fn chi2(split: &SplitPhotonSpec, rows: &[&ReferenceValue], pre: f64, post: f64, cutoff: usize) -> f64 {
    let mut total = 0.0;
    for (r, g) in MEASURED_SETTINGS {
        let here: Vec<_> = rows.iter().filter(|x| x.context.r == Some(r) && x.context.g == Some(g)).collect();
        if here.is_empty() {
            continue;
        }
        let channel = ChannelSpec::new(r, g).with_losses(pre, post);
        let Ok(values) = swapped_values(split, &channel, cutoff) else {
            return f64::INFINITY;
        };
        for row in here {
            let v = values.iter().find(|v| v.quantity == row.quantity).map_or(f64::NAN, |v| v.value);
            total += ((v - row.value) / row.uncertainty).powi(2);
        }
    }
    if total.is_nan() { f64::INFINITY } else { total }
}

/// Least-squares fit of `(pre_loss, post_loss)` to the loss-fit rows at the
/// source's reflectivity: a 20×20 grid over `[0.05, 1]²` followed by three
/// rounds of 11×11 refinement around the best point.
pub fn fit_losses(split: &SplitPhotonSpec, table: &[ReferenceValue], cutoff: usize) -> Result<LossFit> {
    let rows: Vec<&ReferenceValue> = table
        .iter()
        .filter(|r| r.requires == Requirement::LossFit && (r.context.reflectivity - split.reflectivity).abs() < 1e-9)
        .collect();
    if rows.is_empty() {
        return Err(Error::MissingQuantity(format!("reference endpoints at R={}", split.reflectivity)));
    }
    let (lo, hi) = FIT_RANGE;
    let search = |centre: (f64, f64), half: f64, n: usize| -> (f64, f64, f64) {
        let axis = |c: f64| -> Vec<f64> {
            (0..n).map(|k| (c - half + 2.0 * half * k as f64 / (n - 1) as f64).clamp(lo, hi)).collect()
        };
        let points: Vec<(f64, f64)> = axis(centre.0).into_iter().flat_map(|a| axis(centre.1).into_iter().map(move |b| (a, b))).collect();
        points
            .par_iter()
            .map(|&(a, b)| (chi2(split, &rows, a, b, cutoff), a, b))
            .collect::<Vec<_>>()
            .into_iter()
            .fold((f64::INFINITY, hi, hi), |best, c| if c.0 < best.0 { c } else { best })
    };
    let mut best = search(((lo + hi) / 2.0, (lo + hi) / 2.0), (hi - lo) / 2.0, 20);
    let mut half = (hi - lo) / 19.0;
    for _ in 0..3 {
        let next = search((best.1, best.2), half, 11);
        if next.0 <= best.0 {
            best = next;
        }
        half /= 5.0;
    }
    if !best.0.is_finite() {
        return Err(Error::Invariant("loss fit found no evaluable point".into()));
    }
    Ok(LossFit { reflectivity: split.reflectivity, pre_loss: best.1, post_loss: best.2, chi2: best.0, terms: rows.len() })
}

/// Source weights reproducing a target initial-state log-negativity: the
/// multiphoton weight is held fixed and the ideal weight is bisected, with
/// vacuum taking the remainder.
pub fn fit_impurity(reflectivity: f64, target: f64, multiphoton: f64, cutoff: usize) -> Result<Impurity> {
    let e = |ideal: f64| -> Result<f64> {
        let imp = Impurity::new(ideal, 1.0 - multiphoton - ideal, multiphoton);
        Ok(initial_value(&SplitPhotonSpec::impure(reflectivity, imp), cutoff)?.value)
    };
    let (mut lo, mut hi) = (0.0, 1.0 - multiphoton);
    if e(hi)? < target || e(lo)? > target {
        return Err(Error::Invariant(format!("E_AB = {target} unreachable at R = {reflectivity}")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if e(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ideal = 0.5 * (lo + hi);
    Ok(Impurity::new(ideal, 1.0 - multiphoton - ideal, multiphoton))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperComparison {
    /// Source weights used for R = 0.67, fitted to its initial-state value.
    pub fitted_impurity: Impurity,
    pub loss_fits: Vec<LossFit>,
    pub reports: Vec<ComparisonReport>,
}

impl PaperComparison {
    /// True when every fitted endpoint lands within its printed uncertainty.
    pub fn endpoints_reproduced(&self) -> bool {
        self.reports
            .iter()
            .flat_map(|r| &r.rows)
            .filter(|r| r.fitted)
            .all(|r| r.status == Status::FittedPass)
    }
}

/// Full comparison: R = 0.5 with the measured source composition, R = 0.67
/// with weights fitted to its initial-state value, and per-reflectivity
/// loss fits for the swapped-state endpoints.
pub fn paper_comparison(cutoff: usize) -> Result<PaperComparison> {
    let table = reference_table();
    let multiphoton = measured_impurity().multiphoton;
    let fitted_impurity = fit_impurity(0.67, 0.64, multiphoton, cutoff)?;
    let cases = [
        (SplitPhotonSpec::impure(0.5, measured_impurity()), SourceModel::Measured),
        (SplitPhotonSpec::impure(0.67, fitted_impurity.clone()), SourceModel::Fitted),
    ];
    let mut loss_fits = Vec::new();
    let mut reports = Vec::new();
    for (split, source) in cases {
        let fit = fit_losses(&split, &table, cutoff)?;
        let mut values = vec![initial_value(&split, cutoff)?];
        for (r, g) in MEASURED_SETTINGS {
            values.extend(swapped_values(&split, &ChannelSpec::new(r, g).with_losses(fit.pre_loss, fit.post_loss), cutoff)?);
        }
        let sim = SimulatedValues {
            model: ModelInfo { source, losses: LossModel::Fitted { pre_loss: fit.pre_loss, post_loss: fit.post_loss } },
            values,
        };
        let rows: Vec<ReferenceValue> =
            table.iter().filter(|r| (r.context.reflectivity - split.reflectivity).abs() < 1e-9).cloned().collect();
        reports.push(compare_to_paper(&sim, &rows)?);
        loss_fits.push(fit);
    }
    Ok(PaperComparison { fitted_impurity, loss_fits, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_values(split: &SplitPhotonSpec) -> SimulatedValues {
        let mut values = vec![initial_value(split, 5).unwrap()];
        for (r, g) in MEASURED_SETTINGS {
            values.extend(swapped_values(split, &ChannelSpec::new(r, g), 5).unwrap());
        }
        SimulatedValues { model: ModelInfo { source: SourceModel::Ideal, losses: LossModel::None }, values }
    }

    fn rows_at(refl: f64) -> Vec<ReferenceValue> {
        reference_table().into_iter().filter(|r| r.context.reflectivity == refl).collect()
    }

    #[test]
    fn table_transcribes_the_published_numbers() {
        let t = reference_table();
        assert_eq!(t.len(), 3 + 16);
        let find = |q, c: Context| t.iter().find(|r| r.quantity == q && r.context.matches(&c)).unwrap();
        assert_eq!(find(Quantity::EAd, Context::swapped(0.5, 1.01, 0.79)).value, 0.28);
        assert_eq!(find(Quantity::P, Context::swapped(0.5, 0.71, 0.63)).value, 0.125);
        assert_eq!(find(Quantity::S, Context::swapped(0.67, 1.01, 0.79)).uncertainty, 0.04);
        assert_eq!(find(Quantity::EAb, Context::initial(0.5)).band, 0.02);
    }

    #[test]
    fn ideal_model_is_not_comparable() {
        let split = SplitPhotonSpec::pure(0.5);
        let report = compare_to_paper(&ideal_values(&split), &rows_at(0.5)).unwrap();
        assert!(report.rows.iter().all(|r| r.status == Status::NotComparable && !r.fitted));
        assert_eq!(report.rows[1].verdict, "not directly comparable (imperfection fit required)");
        assert_eq!(report.asserted().count(), 0);
    }

    #[test]
    fn measured_source_predicts_initial_value() {
        let split = SplitPhotonSpec::impure(0.5, measured_impurity());
        let sim = SimulatedValues {
            model: ModelInfo { source: SourceModel::Measured, losses: LossModel::None },
            values: vec![initial_value(&split, 5).unwrap()],
        };
        let rows: Vec<_> = rows_at(0.5).into_iter().filter(|r| r.quantity == Quantity::EAb).collect();
        let report = compare_to_paper(&sim, &rows).unwrap();
        assert_eq!(report.rows[0].status, Status::Pass);
        assert!(!report.rows[0].fitted);
        assert!(report.rows[0].deviation.abs() <= 0.02);
    }

    #[test]
    fn fitted_source_is_flagged() {
        let imp = fit_impurity(0.67, 0.64, 0.011, 5).unwrap();
        let split = SplitPhotonSpec::impure(0.67, imp.clone());
        assert!((initial_value(&split, 5).unwrap().value - 0.64).abs() < 1e-9);
        assert!((imp.ideal + imp.vacuum + imp.multiphoton - 1.0).abs() < 1e-12);
        let sim = SimulatedValues {
            model: ModelInfo { source: SourceModel::Fitted, losses: LossModel::None },
            values: vec![initial_value(&split, 5).unwrap()],
        };
        let rows: Vec<_> = rows_at(0.67).into_iter().filter(|r| r.quantity == Quantity::EAb).collect();
        let row = &compare_to_paper(&sim, &rows).unwrap().rows[0];
        assert!(row.fitted);
        assert_eq!(row.status, Status::FittedPass);
    }

    #[test]
    fn missing_quantities_are_errors() {
        let sim = SimulatedValues { model: ModelInfo { source: SourceModel::Measured, losses: LossModel::None }, values: vec![] };
        assert!(matches!(compare_to_paper(&sim, &reference_table()), Err(Error::MissingQuantity(_))));
    }

    #[test]
    fn manual_losses_do_not_count_as_a_fit() {
        let split = SplitPhotonSpec::impure(0.5, measured_impurity());
        let mut sim = ideal_values(&split);
        sim.model = ModelInfo { source: SourceModel::Measured, losses: LossModel::Manual { pre_loss: 0.8, post_loss: 0.9 } };
        let report = compare_to_paper(&sim, &rows_at(0.5)).unwrap();
        assert!(report.rows.iter().filter(|r| r.quantity != Quantity::EAb).all(|r| r.status == Status::NotComparable));
    }

    #[test]
    fn loss_fit_recovers_synthetic_losses() {
        // References generated by the model itself at known transmissivities
        let split = SplitPhotonSpec::impure(0.5, measured_impurity());
        let (pre, post) = (0.7, 0.85);
        let mut table = Vec::new();
        for (r, g) in MEASURED_SETTINGS {
            for v in swapped_values(&split, &ChannelSpec::new(r, g).with_losses(pre, post), 5).unwrap() {
                table.push(reference(v.quantity, v.context, v.value, 0.01, 0.01, Requirement::LossFit));
            }
        }
        let fit = fit_losses(&split, &table, 5).unwrap();
        assert!((fit.pre_loss - pre).abs() < 0.01 && (fit.post_loss - post).abs() < 0.01, "{fit:?}");
        assert!(fit.chi2 < 1e-2);
    }
}
