//! Mass generation and the analyses run on generated formulas: dominance
//! against extant records, reduction reporting, archetype hulls, strength
//! spectra and strength-conditioned progression.

mod archetypes;
mod band;
mod candidates;
mod dominance;
mod progression;
mod spectrum;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use archetypes::{
    archetypal_analysis, hull_faces, nearest_indices, ArchetypeConfig,
    ArchetypeSet, Point,
};
pub use band::{BandPlan, StrengthBand, DEFAULT_HALF_WIDTH};
pub use candidates::{
    bucket_age01, evaluate, generate_candidates, latent_for, sample_conditions,
    targeted_conditions, Candidate, DEFAULT_CANDIDATES,
};
pub use dominance::{
    dominates, extant_baseline, filter_dominating, reduction_pct, reduction_row,
    DominanceBaseline, ReductionReport, ReductionRow,
};
pub use progression::{
    interpolate, progression_experiment, training_impact_means01, training_strength_range,
    AlphaMode, ProgressionPoint, ProgressionReport, DEFAULT_PROGRESSION_SAMPLES,
};
pub use spectrum::{strength_spectrum_export, AxisRange, SpectrumAxes, SpectrumDocument, SpectrumPoint};

use crate::cvae::CvaeParams;
use crate::dataset::{AgeBucket, Column, ImpactVector, NormalizationSpec, CONSTITUENTS};
use crate::predictors::{ImpactPredictor, StrengthPredictorSet};
use crate::{Error, Result};

/// The trained generator and predictors, sharing one normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub cvae: CvaeParams,
    pub impact: ImpactPredictor,
    pub strength: StrengthPredictorSet,
}

impl ModelSet {
    pub fn validate(&self) -> Result<()> {
        self.cvae.nets.validate()?;
        let spec = &self.cvae.normalization;
        if *spec != self.impact.normalization || *spec != self.strength.normalization {
            return Err(Error::Config(
                "generator and predictors were trained with different normalisations".into(),
            ));
        }
        Ok(())
    }
}

/// Affine [0,1] scaling of impacts by the training ranges, without clamping
/// so out-of-range predictions keep their geometry.
pub fn impact01(spec: &NormalizationSpec, v: &ImpactVector) -> Point {
    let a = v.to_array();
    std::array::from_fn(|d| {
        let r = spec.range(Column::IMPACTS[d]);
        if r.is_constant() {
            0.5
        } else {
            (a[d] - r.min) / r.width()
        }
    })
}

pub fn impact_from01(spec: &NormalizationSpec, p: Point) -> ImpactVector {
    ImpactVector::from_array(std::array::from_fn(|d| {
        let r = spec.range(Column::IMPACTS[d]);
        r.min + p[d] * r.width()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullVertex {
    /// Archetype in normalised impact space.
    pub normalized: Point,
    pub impacts: ImpactVector,
    /// Generated formula nearest to the archetype.
    pub nearest: Candidate,
}

/// Archetype hull of the better-performing candidates of one bucket and band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullDocument {
    pub schema: String,
    pub bucket: AgeBucket,
    pub band: StrengthBand,
    pub n_points: usize,
    pub k: usize,
    pub vertices: Vec<HullVertex>,
    /// Triangles over `vertices` indices.
    pub faces: Vec<[usize; 3]>,
    pub rss: f64,
    pub rss_trace: Vec<f64>,
    pub converged: bool,
}

impl HullDocument {
    pub const SCHEMA: &'static str = "archetype-hull/v1";
}

/// For each archetype, the candidate nearest in normalised impact space.
pub fn nearest_to_archetypes(
    spec: &NormalizationSpec,
    candidates: &[Candidate],
    archetypes: &[Point],
) -> Result<Vec<Candidate>> {
    if candidates.is_empty() {
        return Err(Error::Empty("no candidates to match archetypes against".into()));
    }
    let pts: Vec<Point> = candidates.iter().map(|c| impact01(spec, &c.predicted_impacts)).collect();
    Ok(nearest_indices(&pts, archetypes).into_iter().map(|i| candidates[i]).collect())
}

/// Runs archetypal analysis on `filtered`; `k` is capped at the number of
/// points. `None` for an empty set.
pub fn archetype_hull(
    spec: &NormalizationSpec,
    bucket: AgeBucket,
    band: StrengthBand,
    filtered: &[Candidate],
    config: &ArchetypeConfig,
) -> Result<Option<HullDocument>> {
    if filtered.is_empty() {
        return Ok(None);
    }
    let pts: Vec<Point> = filtered.iter().map(|c| impact01(spec, &c.predicted_impacts)).collect();
    let config = ArchetypeConfig {
        k: config.k.min(pts.len()),
        ..*config
    };
    let set = archetypal_analysis(&pts, &config)?;
    let nearest = nearest_to_archetypes(spec, filtered, &set.archetypes)?;
    let vertices = set
        .archetypes
        .iter()
        .zip(nearest)
        .map(|(a, c)| HullVertex {
            normalized: *a,
            impacts: impact_from01(spec, *a),
            nearest: c,
        })
        .collect();
    Ok(Some(HullDocument {
        schema: HullDocument::SCHEMA.into(),
        bucket,
        band,
        n_points: pts.len(),
        k: set.archetypes.len(),
        faces: hull_faces(&set.archetypes),
        vertices,
        rss: set.rss,
        rss_trace: set.rss_trace,
        converged: set.converged,
    }))
}

/// The hull vertex formula with the lowest predicted GWP.
pub fn representative(hull: &HullDocument) -> &Candidate {
    hull.vertices
        .iter()
        .map(|v| &v.nearest)
        .min_by(|a, b| a.predicted_impacts.gwp.total_cmp(&b.predicted_impacts.gwp))
        .expect("hull has at least one vertex")
}

/// Constituent rows by band columns (kg/m³), one representative extremal
/// formula per band; bands without a hull are left blank.
pub fn extremal_formulas_csv(columns: &[(StrengthBand, Option<&HullDocument>)]) -> String {
    let mut out = String::from("constituent");
    for (band, _) in columns {
        let _ = write!(out, ",{band}");
    }
    out.push('\n');
    let reps: Vec<Option<[f64; 7]>> = columns
        .iter()
        .map(|(_, h)| h.map(|h| representative(h).formula.to_array()))
        .collect();
    for (i, name) in CONSTITUENTS.iter().enumerate() {
        out.push_str(name);
        for r in &reps {
            match r {
                Some(a) => {
                    let _ = write!(out, ",{:.1}", a[i]);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
