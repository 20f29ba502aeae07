//! Exhaustive hyperparameter search over one model family.
//!
//! Point `i` trains with seed `derive_seed(cfg.seed, i)`, so results do not
//! depend on the number of worker threads.

use optlab_core::seed::derive_seed;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{NnError, Result};
use crate::layers::{Activation, KanFamily};
use crate::model::{LayerSpec, Model, ModelSpec, INPUT_DIM};
use crate::train::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Mlp,
    Kan,
    /// Stacked same-padded convolutions over a feature window.
    Tdnn,
    Rnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RnnCell {
    Lstm,
    Gru,
}

impl RnnCell {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lstm => "lstm",
            Self::Gru => "gru",
        }
    }
}

macro_rules! defaults {
    ($($f:ident: $t:ty = $v:expr;)*) => { $(fn $f() -> $t { $v })* };
}

defaults! {
    d_widths: Vec<usize> = vec![64];
    d_depths: Vec<usize> = vec![3];
    d_activations: Vec<Activation> = vec![Activation::Tanh];
    d_learning_rates: Vec<f64> = vec![1e-3];
    d_degrees: Vec<Vec<usize>> = vec![vec![2, 5, 4]];
    d_kan_families: Vec<KanFamily> = vec![KanFamily::Chebyshev2];
    d_timesteps: Vec<usize> = vec![5];
    d_dropouts: Vec<f64> = vec![0.0];
    d_kernel_sizes: Vec<usize> = vec![3];
    d_architectures: Vec<Vec<RnnCell>> = vec![vec![RnnCell::Lstm]];
    d_attention: Vec<bool> = vec![false];
}

/// Axes that do not apply to `family` are ignored; recurrent depth comes
/// from `architectures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub family: Family,
    #[serde(default = "d_widths")]
    pub widths: Vec<usize>,
    #[serde(default = "d_depths")]
    pub depths: Vec<usize>,
    #[serde(default = "d_activations")]
    pub activations: Vec<Activation>,
    #[serde(default = "d_learning_rates")]
    pub learning_rates: Vec<f64>,
    /// One KAN layer per listed degree.
    #[serde(default = "d_degrees")]
    pub degrees: Vec<Vec<usize>>,
    #[serde(default = "d_kan_families")]
    pub kan_families: Vec<KanFamily>,
    #[serde(default = "d_timesteps")]
    pub timesteps: Vec<usize>,
    #[serde(default = "d_dropouts")]
    pub dropouts: Vec<f64>,
    #[serde(default = "d_kernel_sizes")]
    pub kernel_sizes: Vec<usize>,
    /// Recurrent stacks, one cell per layer.
    #[serde(default = "d_architectures")]
    pub architectures: Vec<Vec<RnnCell>>,
    #[serde(default = "d_attention")]
    pub attention: Vec<bool>,
}

impl GridSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            widths: d_widths(),
            depths: d_depths(),
            activations: d_activations(),
            learning_rates: d_learning_rates(),
            degrees: d_degrees(),
            kan_families: d_kan_families(),
            timesteps: d_timesteps(),
            dropouts: d_dropouts(),
            kernel_sizes: d_kernel_sizes(),
            architectures: d_architectures(),
            attention: d_attention(),
        }
    }

    fn check_axes(&self) -> Result<()> {
        let axes = [
            ("widths", self.widths.len()),
            ("depths", self.depths.len()),
            ("activations", self.activations.len()),
            ("learning_rates", self.learning_rates.len()),
            ("degrees", self.degrees.len()),
            ("kan_families", self.kan_families.len()),
            ("timesteps", self.timesteps.len()),
            ("dropouts", self.dropouts.len()),
            ("kernel_sizes", self.kernel_sizes.len()),
            ("architectures", self.architectures.len()),
            ("attention", self.attention.len()),
        ];
        if self.degrees.iter().any(Vec::is_empty) || self.architectures.iter().any(Vec::is_empty) {
            return Err(NnError::Config("grid entries `degrees` and `architectures` need at least one layer".into()));
        }
        match axes.iter().find(|(_, n)| *n == 0) {
            Some((name, _)) => Err(NnError::Config(format!("grid axis `{name}` is empty"))),
            None => Ok(()),
        }
    }

    /// Every point in a fixed nesting order.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        self.check_axes()?;
        let mut out = Vec::new();
        let mut push = |spec: ModelSpec, label: String| {
            for &lr in &self.learning_rates {
                out.push((spec.clone(), lr, label.clone()));
            }
        };
        match self.family {
            Family::Mlp => {
                for &w in &self.widths {
                    for &d in &self.depths {
                        for &a in &self.activations {
                            for &p in &self.dropouts {
                                let mut spec = ModelSpec::mlp(w, d, a);
                                for l in &mut spec.layers {
                                    if let LayerSpec::Dense { dropout, .. } = l {
                                        *dropout = p;
                                    }
                                }
                                push(spec, format!("mlp w={w} d={d} act={} drop={p}", a.name()));
                            }
                        }
                    }
                }
            }
            Family::Kan => {
                for &w in &self.widths {
                    for deg in &self.degrees {
                        for &f in &self.kan_families {
                            for &p in &self.dropouts {
                                let label = format!("kan w={w} deg={deg:?} family={} drop={p}", f.name());
                                push(ModelSpec::kan(w, f, deg, p), label);
                            }
                        }
                    }
                }
            }
            Family::Tdnn => {
                for &t in &self.timesteps {
                    for &w in &self.widths {
                        for &d in &self.depths {
                            for &k in &self.kernel_sizes {
                                for &a in &self.activations {
                                    for &p in &self.dropouts {
                                        let layers = (0..d)
                                            .map(|_| LayerSpec::Conv1d {
                                                filters: w,
                                                kernel_size: k,
                                                activation: a,
                                                dropout: p,
                                            })
                                            .collect();
                                        let label = format!("tdnn t={t} w={w} d={d} k={k} act={} drop={p}", a.name());
                                        push(sequence_spec(t, layers), label);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Family::Rnn => {
                for &t in &self.timesteps {
                    for arch in &self.architectures {
                        for &w in &self.widths {
                            for &att in &self.attention {
                                for &a in &self.activations {
                                    for &p in &self.dropouts {
                                        let layers = arch
                                            .iter()
                                            .map(|c| match c {
                                                RnnCell::Lstm => LayerSpec::Lstm {
                                                    units: w,
                                                    attention: att,
                                                    activation: a,
                                                    dropout: p,
                                                },
                                                RnnCell::Gru => LayerSpec::Gru {
                                                    units: w,
                                                    attention: att,
                                                    activation: a,
                                                    dropout: p,
                                                },
                                            })
                                            .collect();
                                        let cells: Vec<&str> = arch.iter().map(|c| c.name()).collect();
                                        let label = format!(
                                            "rnn t={t} arch={} w={w} attention={att} act={} drop={p}",
                                            cells.join("-"),
                                            a.name()
                                        );
                                        push(sequence_spec(t, layers), label);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out
            .into_iter()
            .enumerate()
            .map(|(index, (spec, learning_rate, label))| GridPoint {
                label: format!("{label} lr={learning_rate}"),
                index,
                spec,
                learning_rate,
            })
            .collect())
    }
}

fn sequence_spec(timesteps: usize, layers: Vec<LayerSpec>) -> ModelSpec {
    ModelSpec {
        input_dim: INPUT_DIM,
        timesteps: Some(timesteps),
        layers,
        output_exp: false,
        kan_init: Default::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub label: String,
    pub spec: ModelSpec,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: GridPoint,
    pub seed: u64,
    pub num_params: usize,
    /// Best validation MSE; absent when training failed.
    pub val_loss: Option<f64>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

fn run_point<F>(point: GridPoint, cfg: &TrainConfig, prepare: &F) -> GridResult
where
    F: Fn(&GridPoint) -> Result<(Dataset, Dataset)>,
{
    let seed = derive_seed(cfg.seed, point.index as u64);
    let cfg = TrainConfig { seed, learning_rate: point.learning_rate, ..cfg.clone() };
    let outcome = (|| {
        let (tr, va) = prepare(&point)?;
        let mut model = Model::new(point.spec.clone(), seed)?;
        let history = train(&mut model, &tr, &va, &cfg)?;
        Ok::<_, NnError>((model.num_params(), history))
    })();
    let (num_params, val_loss, best_epoch, error) = match outcome {
        Ok((n, h)) => (n, Some(h.best_val_loss), Some(h.best_epoch), None),
        Err(e) => (point.spec.param_count(), None, None, Some(e.to_string())),
    };
    GridResult { point, seed, num_params, val_loss, best_epoch, error }
}

/// Trains every point and returns results ranked by validation loss, ties
/// and failures kept in grid order (failures last).
pub fn grid_search<F>(grid: &GridSpec, cfg: &TrainConfig, prepare: F) -> Result<Vec<GridResult>>
where
    F: Fn(&GridPoint) -> Result<(Dataset, Dataset)> + Sync,
{
    cfg.validate()?;
    let points = grid.points()?;
    #[cfg(feature = "parallel")]
    let mut results: Vec<GridResult> = {
        use rayon::prelude::*;
        points.into_par_iter().map(|p| run_point(p, cfg, &prepare)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut results: Vec<GridResult> = points.into_iter().map(|p| run_point(p, cfg, &prepare)).collect();
    results.sort_by(|a, b| match (a.val_loss, b.val_loss) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_counts_follow_the_family() {
        let mut g = GridSpec::new(Family::Mlp);
        g.widths = vec![8, 16];
        g.depths = vec![1, 2, 3];
        g.degrees = vec![vec![1], vec![2], vec![3], vec![4]];
        assert_eq!(g.points().unwrap().len(), 6);
        g.family = Family::Kan;
        assert_eq!(g.points().unwrap().len(), 8);
        g.attention = vec![];
        assert!(g.points().is_err());
    }

    #[test]
    fn every_point_builds() {
        for family in [Family::Mlp, Family::Kan, Family::Tdnn, Family::Rnn] {
            let mut g = GridSpec::new(family);
            g.widths = vec![4];
            g.depths = vec![2];
            g.degrees = vec![vec![2, 3]];
            g.architectures = vec![vec![RnnCell::Lstm, RnnCell::Gru], vec![RnnCell::Gru]];
            g.attention = vec![false, true];
            for p in g.points().unwrap() {
                let m = Model::new(p.spec.clone(), 0).unwrap();
                assert_eq!(m.num_params(), p.spec.param_count(), "{}", p.label);
            }
        }
    }

    #[test]
    fn unknown_axis_rejected() {
        assert!(serde_json::from_str::<GridSpec>(r#"{"family": "mlp", "width": [3]}"#).is_err());
        let g: GridSpec = serde_json::from_str(r#"{"family": "kan", "degrees": [[2, 5, 4], [3]]}"#).unwrap();
        assert_eq!(g.points().unwrap().len(), 2);
    }
}
