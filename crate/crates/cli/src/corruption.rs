//! Parser for corruption spec strings like `gaussian:view=2`,
//! `misaligned:view=0+2:fraction=0.5`, or `zeros:view=1:scale=2`.

use edpmvc_core::data::{CorruptionKind, CorruptionSpec};

use crate::CliError;

/// `KIND[:view=V1+V2..][:fraction=F][:scale=S]`. The view list is mandatory;
/// fraction defaults to 1.0 (every sample) and scale to 1.0.
pub fn parse_corruption_spec(s: &str) -> Result<CorruptionSpec, CliError> {
    let usage = |msg: String| CliError::Usage(format!("--corrupt {s:?}: {msg}"));
    let mut parts = s.split(':');
    let kind: CorruptionKind = parts
        .next()
        .unwrap_or_default()
        .parse()
        .map_err(|e| usage(format!("{e}")))?;
    let mut spec = CorruptionSpec::new(kind, Vec::new());
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("expected key=value, got {part:?}")))?;
        match key {
            "view" | "views" => {
                spec.target_views = value
                    .split('+')
                    .map(|v| {
                        v.parse::<usize>()
                            .map_err(|_| usage(format!("bad view index {v:?}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "fraction" => {
                spec.fraction = value
                    .parse()
                    .map_err(|_| usage(format!("bad fraction {value:?}")))?;
            }
            "scale" => {
                spec.noise_scale = value
                    .parse()
                    .map_err(|_| usage(format!("bad scale {value:?}")))?;
            }
            other => return Err(usage(format!("unknown key {other:?}"))),
        }
    }
    if spec.target_views.is_empty() {
        return Err(usage("at least one view=INDEX is required".into()));
    }
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(usage(format!(
            "fraction must lie in [0, 1], got {}",
            spec.fraction
        )));
    }
    if !(spec.noise_scale.is_finite() && spec.noise_scale > 0.0) {
        return Err(usage(format!(
            "scale must be positive and finite, got {}",
            spec.noise_scale
        )));
    }
    // View indices are checked against the actual view count by the caller.
    Ok(spec)
}
