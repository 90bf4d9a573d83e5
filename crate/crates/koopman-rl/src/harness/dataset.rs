//! Plain-CSV transition datasets: `episode,step,x_0..,u_0..,reward,next_x_0..`.
//! The format is deliberately toolchain-neutral; floats are written with
//! Rust's shortest round-trip formatting so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::environments::{EnvironmentSpec, RandomPolicy, Transition, rollout};
use crate::error::{Error, Result};
use crate::koopman::Sample;
use crate::numerics::Vector;

/// Column header for a dataset with `n` state and `m` action coordinates.
pub fn dataset_header(n: usize, m: usize) -> String {
    let mut h = String::from("episode,step");
    for i in 0..n {
        let _ = write!(h, ",x_{i}");
    }
    for j in 0..m {
        let _ = write!(h, ",u_{j}");
    }
    h.push_str(",reward");
    for i in 0..n {
        let _ = write!(h, ",next_x_{i}");
    }
    h
}

/// Serializes episodes of transitions into the dataset CSV format.
pub fn write_transitions(
    path: &Path,
    n: usize,
    m: usize,
    episodes: &[Vec<Transition>],
) -> Result<()> {
    let mut out = dataset_header(n, m);
    out.push('\n');
    for (e, transitions) in episodes.iter().enumerate() {
        for (s, t) in transitions.iter().enumerate() {
            let _ = write!(out, "{e},{s}");
            for v in t.x.iter() {
                let _ = write!(out, ",{v}");
            }
            for v in t.u.iter() {
                let _ = write!(out, ",{v}");
            }
            let _ = write!(out, ",{}", t.reward);
            for v in t.x_next.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// A dataset loaded back from disk.
pub struct Dataset {
    pub state_dim: usize,
    pub action_dim: usize,
    pub rows: Vec<(usize, usize, Transition)>,
}

impl Dataset {
    /// Transition triples `(x, u, x_next)` for tensor fitting.
    pub fn samples(&self) -> Vec<Sample> {
        self.rows
            .iter()
            .map(|(_, _, t)| (t.x.clone(), t.u.clone(), t.x_next.clone()))
            .collect()
    }

    /// The visited states, for value iteration.
    pub fn states(&self) -> Vec<Vector> {
        self.rows.iter().map(|(_, _, t)| t.x.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Parses a dataset CSV, validating the header.
pub fn read_transitions(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::ModelFormat(format!("{}: empty dataset", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols.iter().filter(|c| c.starts_with("x_")).count();
    let m = cols.iter().filter(|c| c.starts_with("u_")).count();
    if n == 0 || dataset_header(n, m) != header {
        return Err(Error::ModelFormat(format!(
            "{}: unrecognized dataset header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 + 2 * n + m {
            return Err(Error::ModelFormat(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                lineno + 2,
                3 + 2 * n + m,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::ModelFormat(format!(
                    "{}:{}: bad number '{s}'",
                    path.display(),
                    lineno + 2
                ))
            })
        };
        let episode: usize = fields[0]
            .parse()
            .map_err(|_| Error::ModelFormat("bad episode index".into()))?;
        let step: usize = fields[1]
            .parse()
            .map_err(|_| Error::ModelFormat("bad step index".into()))?;
        let mut at = 2;
        let mut take = |k: usize| -> Result<Vec<f64>> {
            let vals: Result<Vec<f64>> = fields[at..at + k].iter().map(|s| parse(s)).collect();
            at += k;
            vals
        };
        let x = Vector::new(take(n)?);
        let u = Vector::new(take(m)?);
        let reward = take(1)?[0];
        let x_next = Vector::new(take(n)?);
        rows.push((
            episode,
            step,
            Transition {
                x,
                u,
                reward,
                x_next,
                done: false,
            },
        ));
    }
    // mark episode boundaries
    for i in 0..rows.len() {
        let last_of_episode =
            i + 1 == rows.len() || rows[i + 1].0 != rows[i].0;
        rows[i].2.done = last_of_episode;
    }
    Ok(Dataset {
        state_dim: n,
        action_dim: m,
        rows,
    })
}

/// Runs the uniform-random agent for `n_steps` transitions (episodes reset
/// at the spec's episode length) and writes them as a dataset CSV.
pub fn collect(
    env: &EnvironmentSpec,
    n_steps: usize,
    rng: &mut dyn Rng,
    out: &Path,
) -> Result<usize> {
    if n_steps == 0 {
        return Err(Error::Config("collect needs at least one step".into()));
    }
    let policy = RandomPolicy::for_env(env);
    let episodes_needed = n_steps.div_ceil(env.episode_len);
    let mut episodes = Vec::with_capacity(episodes_needed);
    let mut total = 0usize;
    for (_, transitions) in rollout(env, &policy, rng, episodes_needed) {
        let keep = transitions
            .into_iter()
            .take(n_steps - total)
            .collect::<Vec<_>>();
        total += keep.len();
        episodes.push(keep);
        if total >= n_steps {
            break;
        }
    }
    write_transitions(out, env.state_dim, env.action_dim, &episodes)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::EnvKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    #[test]
    fn collect_writes_exact_row_count_and_is_reproducible() {
        let dir = tempdir().unwrap();
        let mut env = EnvironmentSpec::new(EnvKind::LinearSystem);
        env.episode_len = 40;
        let path_a = dir.path().join("a.csv");
        let path_b = dir.path().join("b.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let written = collect(&env, 100, &mut rng, &path_a).unwrap();
        assert_eq!(written, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        collect(&env, 100, &mut rng, &path_b).unwrap();
        assert_eq!(
            std::fs::read(&path_a).unwrap(),
            std::fs::read(&path_b).unwrap(),
            "same seed must give byte-identical files"
        );
        let ds = read_transitions(&path_a).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.state_dim, 2);
        assert_eq!(ds.action_dim, 1);
        // 100 steps over 40-step episodes: 40 + 40 + 20
        assert_eq!(ds.rows.iter().filter(|(e, _, _)| *e == 2).count(), 20);
    }

    #[test]
    fn collect_degenerate_bounds_yields_zero_actions() {
        let dir = tempdir().unwrap();
        let mut env = EnvironmentSpec::new(EnvKind::DoubleWell);
        env.action_low = vec![0.0];
        env.action_high = vec![0.0];
        env.episode_len = 10;
        let path = dir.path().join("z.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        collect(&env, 30, &mut rng, &path).unwrap();
        let ds = read_transitions(&path).unwrap();
        for (_, _, t) in &ds.rows {
            assert_eq!(t.u.as_slice(), &[0.0]);
        }
    }

    #[test]
    fn roundtrip_preserves_values_and_rejects_bad_header() {
        let dir = tempdir().unwrap();
        let env = EnvironmentSpec::new(EnvKind::FluidFlow);
        let path = dir.path().join("ff.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        collect(&env, 50, &mut rng, &path).unwrap();
        let ds = read_transitions(&path).unwrap();
        assert_eq!(ds.len(), 50);
        for (_, _, t) in &ds.rows {
            assert_eq!(t.reward, -crate::environments::cost(&env, &t.x, &t.u));
        }
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,b,c\n1,2,3\n").unwrap();
        assert!(read_transitions(&bad).is_err());
    }
}
