use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{read_to_string, sibling, IoError};
use crate::pipeline::PipelineSpec;
use crate::profile::{fit_profile, ModelProfile, ProfileSample, DEFAULT_LIMIT};

#[derive(Debug, Deserialize)]
struct SampleRow {
    batch: u32,
    cores: u32,
    latency_ms: f64,
}

/// Reads profiling measurements from a `batch,cores,latency_ms` CSV.
pub fn load_profile_samples(path: &Path) -> Result<Vec<ProfileSample>, IoError> {
    parse_profile_samples(&read_to_string(path)?, path)
}

pub fn parse_profile_samples(text: &str, origin: &Path) -> Result<Vec<ProfileSample>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IoError::parse(origin, Some(1), e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["batch", "cores", "latency_ms"] {
        return Err(IoError::parse(
            origin,
            Some(1),
            "expected header `batch,cores,latency_ms`",
        ));
    }
    let mut samples = Vec::new();
    for row in reader.deserialize::<SampleRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line());
            IoError::parse(origin, line, e.to_string())
        })?;
        let sample = ProfileSample::new(row.batch, row.cores, row.latency_ms).map_err(|source| IoError::Profile {
            path: origin.to_path_buf(),
            source,
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: Option<String>,
    slo_ms: u32,
    stages: Vec<RawStage>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    name: String,
    gamma: Option<f64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    eta: Option<f64>,
    profile_csv: Option<PathBuf>,
    b_max: Option<u32>,
    c_max: Option<u32>,
}

/// Reads a TOML pipeline description.
///
/// Each stage gives either its four coefficients or a `profile_csv` path,
/// relative to the spec file, which is fitted on load.
pub fn load_pipeline_spec(path: &Path) -> Result<PipelineSpec, IoError> {
    parse_pipeline_spec(&read_to_string(path)?, path)
}

pub fn parse_pipeline_spec(text: &str, origin: &Path) -> Result<PipelineSpec, IoError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].lines().count().max(1) as u64);
        IoError::parse(origin, line, e.message().to_string())
    })?;
    let mut stages = Vec::with_capacity(raw.stages.len());
    for stage in raw.stages {
        stages.push(build_stage(stage, origin)?);
    }
    let name = raw.name.unwrap_or_else(|| {
        origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pipeline".into())
    });
    PipelineSpec::new(name, raw.slo_ms, stages).map_err(|e| IoError::parse(origin, None, e.to_string()))
}

fn build_stage(stage: RawStage, origin: &Path) -> Result<ModelProfile, IoError> {
    let b_max = stage.b_max.unwrap_or(DEFAULT_LIMIT);
    let c_max = stage.c_max.unwrap_or(DEFAULT_LIMIT);
    let coefficients = [stage.gamma, stage.epsilon, stage.delta, stage.eta];
    match (&stage.profile_csv, coefficients) {
        (Some(csv), [None, None, None, None]) => {
            let csv_path = sibling(origin, csv);
            let samples = load_profile_samples(&csv_path)?;
            fit_profile(stage.name, &samples, b_max, c_max).map_err(|source| IoError::Profile {
                path: csv_path,
                source,
            })
        }
        (None, [Some(gamma), Some(epsilon), Some(delta), Some(eta)]) => {
            ModelProfile::new(stage.name, gamma, epsilon, delta, eta, b_max, c_max).map_err(|source| {
                IoError::Profile {
                    path: origin.to_path_buf(),
                    source,
                }
            })
        }
        (Some(_), _) => Err(IoError::parse(
            origin,
            None,
            format!("stage `{}`: give either profile_csv or coefficients, not both", stage.name),
        )),
        (None, _) => Err(IoError::parse(
            origin,
            None,
            format!(
                "stage `{}`: needs gamma, epsilon, delta and eta, or profile_csv",
                stage.name
            ),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileError;

    const TWO_STAGE: &str = r#"
name = "video"
slo_ms = 780

[[stages]]
name = "detect"
gamma = 10.0
epsilon = 40.0
delta = 2.0
eta = 5.0

[[stages]]
name = "classify"
gamma = 6.0
epsilon = 20.0
delta = 1.0
eta = 3.0
b_max = 8
c_max = 8
"#;

    #[test]
    fn coefficient_stages() {
        let spec = parse_pipeline_spec(TWO_STAGE, Path::new("video.toml")).unwrap();
        assert_eq!(spec.len(), 2);
        assert_eq!(spec.slo_ms, 780);
        assert_eq!(spec.stages[0].b_max, 16);
        assert_eq!(spec.stages[1].c_max, 8);
    }

    #[test]
    fn zero_slo_is_a_parse_error() {
        let text = TWO_STAGE.replace("slo_ms = 780", "slo_ms = 0");
        assert!(matches!(
            parse_pipeline_spec(&text, Path::new("x.toml")),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn malformed_stage_definitions() {
        let missing = "slo_ms = 100\n[[stages]]\nname = \"a\"\ngamma = 1.0\n";
        assert!(matches!(
            parse_pipeline_spec(missing, Path::new("x.toml")),
            Err(IoError::Parse { .. })
        ));
        let both = "slo_ms = 100\n[[stages]]\nname = \"a\"\ngamma = 1.0\nepsilon = 1.0\ndelta = 1.0\neta = 1.0\nprofile_csv = \"a.csv\"\n";
        assert!(matches!(
            parse_pipeline_spec(both, Path::new("x.toml")),
            Err(IoError::Parse { .. })
        ));
        let negative = "slo_ms = 100\n[[stages]]\nname = \"a\"\ngamma = -1.0\nepsilon = 1.0\ndelta = 1.0\neta = 1.0\n";
        assert!(matches!(
            parse_pipeline_spec(negative, Path::new("x.toml")),
            Err(IoError::Profile { .. })
        ));
        match parse_pipeline_spec("slo_ms = \"fast\"\n", Path::new("x.toml")) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, Some(1)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn sample_csv() {
        let text = "batch,cores,latency_ms\n1,1,57\n4,2,53\n";
        let samples = parse_profile_samples(text, Path::new("p.csv")).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[1].latency_ms, 53.0);
        assert!(matches!(
            parse_profile_samples("b,c,l\n1,1,1\n", Path::new("p.csv")),
            Err(IoError::Parse { line: Some(1), .. })
        ));
        assert!(matches!(
            parse_profile_samples("batch,cores,latency_ms\n1,1,x\n", Path::new("p.csv")),
            Err(IoError::Parse { line: Some(2), .. })
        ));
        assert!(matches!(
            parse_profile_samples("batch,cores,latency_ms\n0,1,5\n", Path::new("p.csv")),
            Err(IoError::Profile {
                source: ProfileError::Invalid(_),
                ..
            })
        ));
    }
}
