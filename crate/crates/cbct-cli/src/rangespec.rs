//! `start:step:stop` range flags, inclusive of both ends when the step
//! divides the span.

use anyhow::{bail, Result};

/// Parses either a single value or `start:step:stop`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.len() {
        1 => Ok(vec![parse_num(parts[0])?]),
        3 => {
            let start = parse_num(parts[0])?;
            let step = parse_num(parts[1])?;
            let stop = parse_num(parts[2])?;
            if step <= 0.0 {
                bail!("range step must be positive, got {step}");
            }
            if stop < start {
                bail!("range stop {stop} is below start {start}");
            }
            let n = ((stop - start) / step + 0.5).floor() as usize;
            let mut values = Vec::with_capacity(n + 1);
            let mut k = 0usize;
            loop {
                let v = start + k as f64 * step;
                if v > stop + 1e-9 * step.max(1.0) {
                    break;
                }
                values.push(v);
                k += 1;
            }
            Ok(values)
        }
        _ => bail!("range spec `{spec}` must be a number or start:step:stop"),
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| anyhow::anyhow!("`{s}` is not a number"))
}
