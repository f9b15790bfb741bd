//! End-to-end orchestration: mesh-sequence ingestion, curve extraction,
//! DSF computation, magnification, classification, and report export.
//!
//! Every stage consumes and produces the declared file formats, so the same
//! results are reachable through separate CLI invocations of the individual
//! stages.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::{Point3, Vector3};

use crate::align::{rigid_align, IcpParams};
use crate::classify::{
    cross_validate, fit_hmm_sequence_model, fit_svm_sequence_model, CvReport, LabeledSequence,
    TrainedModel,
};
use crate::config::{ClassifierKind, PipelineConfig};
use crate::curves::{extract_radial_curves, CurveFan, ExtractionFrame};
use crate::dsf::{dsf_sequence, DsfSequence};
use crate::error::{Error, Result};
use crate::hmm::HmmTrainConfig;
use crate::io::{read_labels, write_dsf, write_fans, write_labels, LabelEntry};
use crate::magnify::magnify_sequence;
use crate::mesh::{crop_face, find_nose_tip, load_mesh, TriMesh};
use crate::report::{write_confusion_csv, write_summary_csv, write_trajectory_csv};
use crate::svm::SvmParams;
use crate::synth::{synth_generate, SynthSpec};

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub curves: usize,
    pub samples: usize,
    pub crop_radius: f64,
    pub nose: Option<Point3<f64>>,
    pub icp: IcpParams,
}

impl ExtractOptions {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        ExtractOptions {
            curves: cfg.curves,
            samples: cfg.samples,
            crop_radius: cfg.crop_radius,
            nose: cfg.nose.map(|n| Point3::new(n[0], n[1], n[2])),
            icp: cfg.icp,
        }
    }
}

/// Sorted `.obj` frame paths of a mesh-sequence directory.
pub fn list_obj_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut frames: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")))
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(Error::format(format!(
            "no .obj frames in {}",
            dir.as_ref().display()
        )));
    }
    Ok(frames)
}

pub fn load_sequence_dir(dir: impl AsRef<Path>) -> Result<Vec<TriMesh>> {
    list_obj_frames(&dir)?
        .iter()
        .enumerate()
        .map(|(i, p)| load_mesh(p).map_err(|e| e.at_frame(i)))
        .collect()
}

/// Aligns every frame to the first, crops around the nose tip, and extracts
/// the radial-curve fan per frame. The nose tip is detected once on the
/// reference frame (or taken from the override) and reused.
pub fn extract_fan_sequence(frames: &[TriMesh], opts: &ExtractOptions) -> Result<Vec<CurveFan>> {
    if frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let reference = &frames[0];
    let nose = match opts.nose {
        Some(p) => p,
        None => find_nose_tip(reference, &Vector3::z())?,
    };
    let frame = ExtractionFrame::canonical();
    let mut fans = Vec::with_capacity(frames.len());
    for (i, mesh) in frames.iter().enumerate() {
        let aligned = if i == 0 {
            mesh.clone()
        } else {
            let result = rigid_align(mesh, reference, &opts.icp).map_err(|e| e.at_frame(i))?;
            if !result.converged {
                warn!(
                    "frame {i}: ICP stopped after {} iterations with residual {:.3e}",
                    result.iterations, result.residual_rms
                );
            }
            result.aligned
        };
        let cropped = crop_face(&aligned, &nose, opts.crop_radius).map_err(|e| e.at_frame(i))?;
        let fan = extract_radial_curves(&cropped, &nose, &frame, opts.curves, opts.samples)
            .map_err(|e| e.at_frame(i))?;
        fans.push(fan);
    }
    Ok(fans)
}

/// Classifier factory shared by cross-validation and final-model training.
pub fn fit_classifier(
    kind: ClassifierKind,
    cfg: &PipelineConfig,
    train: &[&LabeledSequence],
    seed: u64,
) -> Result<TrainedModel> {
    match kind {
        ClassifierKind::Svm => fit_svm_sequence_model(train, &SvmParams::default(), seed),
        ClassifierKind::Hmm => fit_hmm_sequence_model(
            train,
            &cfg.pool,
            &HmmTrainConfig {
                states: cfg.states,
                ..HmmTrainConfig::default()
            },
            seed,
        ),
    }
}

/// Cross-validates and then fits a final model on the full dataset.
pub fn train_and_report(
    data: &[LabeledSequence],
    cfg: &PipelineConfig,
    kind: ClassifierKind,
) -> Result<(CvReport, TrainedModel)> {
    let report = cross_validate(data, cfg.folds, cfg.seed, |train, seed| {
        let model = fit_classifier(kind, cfg, train, seed)?;
        Ok(move |seq: &DsfSequence| model.predict(seq).map(|(label, _)| label))
    })?;
    let all: Vec<&LabeledSequence> = data.iter().collect();
    let model = fit_classifier(kind, cfg, &all, cfg.seed)?;
    Ok((report, model))
}

#[derive(Debug, Clone)]
pub enum PipelineInput {
    /// Directory containing `labels.csv` and one mesh-sequence directory per
    /// row.
    Dataset(PathBuf),
    /// Generate a synthetic dataset first.
    Synth(Box<SynthSpec>),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Evaluate both the unmagnified (WV) and magnified (MWV) conditions.
    pub compare: bool,
    pub classifiers: Vec<ClassifierKind>,
}

#[derive(Debug)]
pub struct ConditionResult {
    /// `wv` or `mwv`.
    pub condition: &'static str,
    pub classifier: ClassifierKind,
    pub report: CvReport,
}

#[derive(Debug)]
pub struct RunSummary {
    pub results: Vec<ConditionResult>,
    pub output_dir: PathBuf,
    pub clamp_count: usize,
}

fn sanitize_id(path: &str) -> String {
    path.chars()
        .map(|c| if c == '/' || c == '\\' { '_' } else { c })
        .collect()
}

/// Runs the full pipeline, persisting every intermediate under `out_dir`.
pub fn run_pipeline(
    input: &PipelineInput,
    cfg: &PipelineConfig,
    opts: &RunOptions,
    out_dir: impl AsRef<Path>,
) -> Result<RunSummary> {
    let out_dir = out_dir.as_ref().to_path_buf();
    fs::create_dir_all(&out_dir)?;

    let dataset_dir = match input {
        PipelineInput::Dataset(dir) => dir.clone(),
        PipelineInput::Synth(spec) => {
            let dir = out_dir.join("dataset");
            info!("stage synth: generating dataset under {}", dir.display());
            synth_generate(spec, cfg.seed, &dir).map_err(|e| e.in_stage("synth"))?;
            dir
        }
    };
    let entries =
        read_labels(dataset_dir.join("labels.csv")).map_err(|e| e.in_stage("extract"))?;
    info!("stage extract: {} sequences", entries.len());

    let fans_dir = out_dir.join("fans");
    let dsf_dir = out_dir.join("dsf");
    fs::create_dir_all(&fans_dir)?;
    fs::create_dir_all(&dsf_dir)?;
    let magnified_wanted = true; // run always produces the magnified path
    let mag_dir = out_dir.join("dsf_mag");
    if magnified_wanted {
        fs::create_dir_all(&mag_dir)?;
    }

    let extract_opts = ExtractOptions::from_config(cfg);
    let rate = cfg.magnify.sample_rate as u32;
    info!(
        "stage magnify: zeta={} gamma={} levels={} band=({}, {}) rate={}",
        cfg.magnify.zeta,
        cfg.magnify.gamma,
        cfg.magnify.levels,
        cfg.magnify.band.0,
        cfg.magnify.band.1,
        cfg.magnify.sample_rate
    );

    let mut plain: Vec<LabeledSequence> = Vec::with_capacity(entries.len());
    let mut magnified: Vec<LabeledSequence> = Vec::with_capacity(entries.len());
    let mut dsf_entries: Vec<LabelEntry> = Vec::with_capacity(entries.len());
    let mut clamp_count = 0usize;
    for entry in &entries {
        let id = sanitize_id(&entry.path);
        let frames = load_sequence_dir(dataset_dir.join(&entry.path))
            .map_err(|e| e.in_stage(format!("extract {id}")))?;
        let fans = extract_fan_sequence(&frames, &extract_opts)
            .map_err(|e| e.in_stage(format!("extract {id}")))?;
        write_fans(fans_dir.join(format!("{id}.fan")), &fans)?;

        let seq =
            dsf_sequence(&fans, rate).map_err(|e| e.in_stage(format!("dsf {id}")))?;
        write_dsf(dsf_dir.join(format!("{id}.dsf")), &seq)?;

        if magnified_wanted {
            let result = magnify_sequence(&seq, &cfg.magnify)
                .map_err(|e| e.in_stage(format!("magnify {id}")))?;
            clamp_count += result.clamp_count;
            write_dsf(mag_dir.join(format!("{id}.dsf")), &result.sequence)?;
            magnified.push(LabeledSequence {
                sequence: result.sequence,
                label: entry.label,
                subject: entry.subject.clone(),
            });
        }
        dsf_entries.push(LabelEntry {
            path: format!("{id}.dsf"),
            label: entry.label,
            subject: entry.subject.clone(),
        });
        plain.push(LabeledSequence {
            sequence: seq,
            label: entry.label,
            subject: entry.subject.clone(),
        });
    }
    write_labels(dsf_dir.join("labels.csv"), &dsf_entries)?;
    if magnified_wanted {
        write_labels(mag_dir.join("labels.csv"), &dsf_entries)?;
        info!("stage magnify: {} entries clamped to zero", clamp_count);
    }

    let reports_dir = out_dir.join("reports");
    let models_dir = out_dir.join("models");
    fs::create_dir_all(&reports_dir)?;
    fs::create_dir_all(&models_dir)?;

    let conditions: Vec<(&'static str, &Vec<LabeledSequence>)> = if opts.compare {
        vec![("wv", &plain), ("mwv", &magnified)]
    } else {
        vec![("mwv", &magnified)]
    };

    let mut results = Vec::new();
    let mut summary_rows = Vec::new();
    for (condition, data) in &conditions {
        for &classifier in &opts.classifiers {
            info!("stage classify: condition={condition} classifier={classifier}");
            let (report, model) = train_and_report(data, cfg, classifier)
                .map_err(|e| e.in_stage(format!("classify {condition} {classifier}")))?;
            write_confusion_csv(
                reports_dir.join(format!("confusion_{condition}_{classifier}.csv")),
                &report.confusion,
            )?;
            summary_rows.push((
                format!("accuracy_{condition}_{classifier}"),
                report.mean_accuracy,
                report.std_accuracy,
            ));
            let json = serde_json::to_string_pretty(&model)
                .map_err(|e| Error::format(format!("model serialization failed: {e}")))?;
            fs::write(
                models_dir.join(format!("{condition}_{classifier}.json")),
                json,
            )?;
            results.push(ConditionResult {
                condition,
                classifier,
                report,
            });
        }
    }
    write_summary_csv(reports_dir.join("summary.csv"), &summary_rows)?;

    let traj_dir = reports_dir.join("trajectories");
    fs::create_dir_all(&traj_dir)?;
    for (condition, data) in &conditions {
        for (entry, item) in dsf_entries.iter().zip(data.iter()) {
            let id = entry.path.trim_end_matches(".dsf");
            write_trajectory_csv(
                traj_dir.join(format!("{condition}_{id}.csv")),
                &item.sequence,
            )?;
        }
    }

    Ok(RunSummary {
        results,
        output_dir: out_dir,
        clamp_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::hemisphere;
    use approx::assert_abs_diff_eq;

    #[test]
    fn extraction_recovers_jittered_hemisphere_fans() {
        // Jittered copies of one surface must produce near-identical fans
        // after alignment.
        let base = hemisphere(10.0, 10, 20);
        let rot = nalgebra::Rotation3::from_euler_angles(0.02, -0.015, 0.01).into_inner();
        let moved = crate::align::RigidTransform::new(rot, Vector3::new(0.3, -0.2, 0.1));
        let frames = vec![base.clone(), moved.apply_mesh(&base)];
        let opts = ExtractOptions {
            curves: 16,
            samples: 12,
            crop_radius: 12.0,
            nose: None,
            icp: IcpParams::default(),
        };
        let fans = extract_fan_sequence(&frames, &opts).unwrap();
        assert_eq!(fans.len(), 2);
        for (a, b) in fans[0].curves.iter().zip(&fans[1].curves) {
            assert!(!a.degenerate && !b.degenerate);
            for (p, q) in a.points.iter().zip(&b.points) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn nose_override_is_respected() {
        let base = hemisphere(10.0, 8, 16);
        let opts = ExtractOptions {
            curves: 8,
            samples: 6,
            crop_radius: 12.0,
            nose: Some(Point3::new(0.0, 0.0, 10.0)),
            icp: IcpParams::default(),
        };
        let fans = extract_fan_sequence(&[base], &opts).unwrap();
        assert_abs_diff_eq!(fans[0].origin, Point3::new(0.0, 0.0, 10.0), epsilon = 0.0);
    }
}
