//! Assembly of the analyze configuration from a key=value config file and
//! command-line flags, with flags taking precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gknn_core::dataset::{SyntheticKind, VectorFormat};
use gknn_core::graph::EdgeStrategy;
use gknn_core::harness::DatasetSpec;

/// Which analysis table to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    CcVsK,
    CcVsRecall,
    Scc,
    TwoPhase,
    Theorem1,
}

impl FromStr for TableKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cc-vs-k" => Ok(TableKind::CcVsK),
            "cc-vs-recall" => Ok(TableKind::CcVsRecall),
            "scc" => Ok(TableKind::Scc),
            "two-phase" => Ok(TableKind::TwoPhase),
            "theorem1" => Ok(TableKind::Theorem1),
            other => Err(format!(
                "unknown table `{other}` (expected cc-vs-k, cc-vs-recall, scc, two-phase, or theorem1)"
            )),
        }
    }
}

pub fn infer_format(path: &Path) -> VectorFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => VectorFormat::Csv,
        _ => VectorFormat::Fvecs,
    }
}

/// Parses a dataset description of the form `kind:key=value,...`:
///
/// - `file:name=sift,path=base.fvecs[,format=fvecs|csv]`
/// - `uniform:name=u1,n=20000,dim=32,seed=1`
/// - `clusters:name=c1,n=20000,dim=32,seed=2,clusters=2000,sigma=0.05`
pub fn parse_dataset_spec(s: &str) -> Result<DatasetSpec, String> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("dataset `{s}`: expected `kind:key=value,...`"))?;
    let mut fields = BTreeMap::new();
    for part in rest.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("dataset `{s}`: `{part}` is not key=value"))?;
        if fields.insert(key.trim(), value.trim()).is_some() {
            return Err(format!("dataset `{s}`: duplicate key `{}`", key.trim()));
        }
    }
    let mut take = |key: &str| {
        fields
            .remove(key)
            .ok_or_else(|| format!("dataset `{s}`: missing key `{key}`"))
    };
    let parse_num = |key: &str, value: &str| -> Result<u64, String> {
        value
            .parse()
            .map_err(|_| format!("dataset `{s}`: `{key}={value}` is not a non-negative integer"))
    };

    let spec = match kind {
        "file" => {
            let name = take("name")?.to_string();
            let path = PathBuf::from(take("path")?);
            let format = match fields.remove("format") {
                Some(f) => f.parse::<VectorFormat>().map_err(|e| format!("dataset `{s}`: {e}"))?,
                None => infer_format(&path),
            };
            DatasetSpec::File { name, path, format }
        }
        "uniform" | "clusters" => {
            let name = take("name")?.to_string();
            let n = parse_num("n", take("n")?)? as usize;
            let dim = parse_num("dim", take("dim")?)? as usize;
            let seed = parse_num("seed", take("seed")?)?;
            let kind = if kind == "uniform" {
                SyntheticKind::Uniform
            } else {
                let clusters = parse_num("clusters", take("clusters")?)? as usize;
                let sigma_raw = take("sigma")?;
                let sigma: f64 = sigma_raw
                    .parse()
                    .map_err(|_| format!("dataset `{s}`: `sigma={sigma_raw}` is not a number"))?;
                SyntheticKind::GaussianClusters { clusters, sigma }
            };
            DatasetSpec::Synthetic { name, kind, n, dim, seed }
        }
        other => {
            return Err(format!(
                "dataset `{s}`: unknown kind `{other}` (expected file, uniform, or clusters)"
            ))
        }
    };
    if let Some((key, _)) = fields.iter().next() {
        return Err(format!("dataset `{s}`: unknown key `{key}`"));
    }
    Ok(spec)
}

/// Analyze settings before validation; every field mirrors one flag.
#[derive(Debug, Default, Clone)]
pub struct PartialConfig {
    pub table: Option<TableKind>,
    pub datasets: Vec<DatasetSpec>,
    pub k_list: Option<Vec<usize>>,
    pub strategies: Option<Vec<EdgeStrategy>>,
    pub cap: Option<Option<usize>>,
    pub num_queries: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl PartialConfig {
    /// Applies `flags` on top of `self` (file-provided values); any flag
    /// that was given wins, including the dataset list as a whole.
    pub fn overridden_by(mut self, flags: PartialConfig) -> PartialConfig {
        if flags.table.is_some() {
            self.table = flags.table;
        }
        if !flags.datasets.is_empty() {
            self.datasets = flags.datasets;
        }
        if flags.k_list.is_some() {
            self.k_list = flags.k_list;
        }
        if flags.strategies.is_some() {
            self.strategies = flags.strategies;
        }
        if flags.cap.is_some() {
            self.cap = flags.cap;
        }
        if flags.num_queries.is_some() {
            self.num_queries = flags.num_queries;
        }
        if flags.k.is_some() {
            self.k = flags.k;
        }
        if flags.l.is_some() {
            self.l = flags.l;
        }
        if flags.seed.is_some() {
            self.seed = flags.seed;
        }
        if flags.trials.is_some() {
            self.trials = flags.trials;
        }
        if flags.out_dir.is_some() {
            self.out_dir = flags.out_dir;
        }
        self
    }
}

pub fn parse_comma_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>, String> = s
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|e| format!("bad {what} `{}`: {e}", part.trim()))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(format!("empty {what} list"));
    }
    Ok(items)
}

fn parse_usize(key: &str, value: &str) -> Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("config key `{key}`: `{value}` is not a non-negative integer"))
}

/// Parses a key=value config file. Lines are `key = value`; `#` starts a
/// comment; `dataset` may repeat and accumulates. Unknown keys are errors.
pub fn parse_config_file(path: &Path, text: &str) -> Result<PartialConfig, String> {
    let mut config = PartialConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let located = |e: String| format!("{}:{}: {e}", path.display(), lineno + 1);
        match key {
            "table" => config.table = Some(value.parse().map_err(located)?),
            "dataset" => config.datasets.push(parse_dataset_spec(value).map_err(located)?),
            "k-list" => {
                config.k_list = Some(parse_comma_list(value, "K value").map_err(located)?)
            }
            "strategies" => {
                config.strategies =
                    Some(parse_comma_list(value, "strategy").map_err(located)?)
            }
            "cap" => {
                config.cap = Some(if value == "none" {
                    None
                } else {
                    Some(parse_usize(key, value).map_err(located)?)
                })
            }
            "num-queries" => {
                config.num_queries = Some(parse_usize(key, value).map_err(located)?)
            }
            "k" => config.k = Some(parse_usize(key, value).map_err(located)?),
            "l" => config.l = Some(parse_usize(key, value).map_err(located)?),
            "seed" => {
                config.seed = Some(value.parse().map_err(|_| {
                    located(format!("config key `seed`: `{value}` is not a non-negative integer"))
                })?)
            }
            "trials" => config.trials = Some(parse_usize(key, value).map_err(located)?),
            "out-dir" => config.out_dir = Some(PathBuf::from(value)),
            other => {
                return Err(format!(
                    "{}:{}: unknown config key `{other}`",
                    path.display(),
                    lineno + 1
                ))
            }
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_spec_grammar() {
        let spec = parse_dataset_spec("uniform:name=u1,n=100,dim=8,seed=3").unwrap();
        assert_eq!(
            spec,
            DatasetSpec::Synthetic {
                name: "u1".into(),
                kind: SyntheticKind::Uniform,
                n: 100,
                dim: 8,
                seed: 3,
            }
        );
        let spec =
            parse_dataset_spec("clusters:name=c,n=50,dim=4,seed=9,clusters=5,sigma=0.02").unwrap();
        match spec {
            DatasetSpec::Synthetic {
                kind: SyntheticKind::GaussianClusters { clusters, sigma },
                ..
            } => {
                assert_eq!(clusters, 5);
                assert_eq!(sigma, 0.02);
            }
            other => panic!("unexpected spec {other:?}"),
        }
        let spec = parse_dataset_spec("file:name=s,path=base.csv").unwrap();
        assert_eq!(
            spec,
            DatasetSpec::File {
                name: "s".into(),
                path: "base.csv".into(),
                format: VectorFormat::Csv,
            }
        );
    }

    #[test]
    fn dataset_spec_rejections() {
        for bad in [
            "uniform",
            "mystery:name=x",
            "uniform:name=u1,n=100,dim=8",            // missing seed
            "uniform:name=u1,n=100,dim=8,seed=1,x=2", // unknown key
            "uniform:name=u1,n=ten,dim=8,seed=1",
            "uniform:name=u1,name=u2,n=1,dim=1,seed=1",
        ] {
            assert!(parse_dataset_spec(bad).is_err(), "accepted {bad}");
        }
    }

    #[test]
    fn config_file_round_trip_and_precedence() {
        let text = "\
# comment line
table = scc
dataset = uniform:name=a,n=40,dim=3,seed=1
dataset = uniform:name=b,n=40,dim=3,seed=2
k-list = 4,8
strategies = directed, undirected
cap = 12
num-queries = 5
k = 3
l = 3
seed = 11
out-dir = /tmp/out
";
        let file = parse_config_file(Path::new("test.cfg"), text).unwrap();
        assert_eq!(file.table, Some(TableKind::Scc));
        assert_eq!(file.datasets.len(), 2);
        assert_eq!(file.k_list, Some(vec![4, 8]));
        assert_eq!(
            file.strategies,
            Some(vec![EdgeStrategy::DirectedKnn, EdgeStrategy::UndirectedKnn])
        );
        assert_eq!(file.cap, Some(Some(12)));
        assert_eq!(file.seed, Some(11));

        let flags = PartialConfig {
            k: Some(7),
            cap: Some(None),
            datasets: vec![parse_dataset_spec("uniform:name=c,n=40,dim=3,seed=3").unwrap()],
            ..PartialConfig::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.k, Some(7)); // flag wins
        assert_eq!(merged.l, Some(3)); // file survives
        assert_eq!(merged.cap, Some(None)); // explicit `none` flag wins
        assert_eq!(merged.datasets.len(), 1); // flag datasets replace file's
        assert_eq!(merged.datasets[0].name(), "c");
    }

    #[test]
    fn config_file_rejects_unknown_key() {
        let err = parse_config_file(Path::new("x.cfg"), "mystery = 3\n").unwrap_err();
        assert!(err.contains("unknown config key `mystery`"), "{err}");
        assert!(err.starts_with("x.cfg:1"), "{err}");
    }

    #[test]
    fn config_file_rejects_bad_values() {
        assert!(parse_config_file(Path::new("x"), "k\n").is_err());
        assert!(parse_config_file(Path::new("x"), "k = many\n").is_err());
        assert!(parse_config_file(Path::new("x"), "table = nope\n").is_err());
        assert!(parse_config_file(Path::new("x"), "strategies = directed,bogus\n").is_err());
    }
}
