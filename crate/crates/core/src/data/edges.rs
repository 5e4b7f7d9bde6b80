use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// A graph with a dense 0/1 adjacency matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    /// N×N, `A[i,j] = 1` for an edge i→j.
    pub adjacency: DenseMatrix,
    /// Class id per node; `None` for unlabeled nodes.
    pub labels: Option<Vec<Option<usize>>>,
    /// Original label strings, indexed by class id.
    pub label_names: Vec<String>,
    /// Original node ids, indexed by node.
    pub node_ids: Vec<String>,
}

impl GraphDataset {
    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.adjacency
            .row_iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.out_degrees().iter().sum()
    }

    /// Indices of labeled nodes and their class ids.
    pub fn labeled(&self) -> (Vec<usize>, Vec<usize>) {
        match &self.labels {
            None => (Vec::new(), Vec::new()),
            Some(l) => l.iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c))).unzip(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeListOptions {
    /// Fixed node count; ids beyond it are an error.
    pub node_count: Option<usize>,
    pub directed: bool,
    pub allow_self_loops: bool,
    /// Optional `id<TAB>label` file.
    pub labels: Option<PathBuf>,
}

impl Default for EdgeListOptions {
    fn default() -> Self {
        Self {
            node_count: None,
            directed: true,
            allow_self_loops: false,
            labels: None,
        }
    }
}

struct Interner {
    index: HashMap<String, usize>,
    ids: Vec<String>,
}

impl Interner {
    fn get(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.index.insert(id.to_string(), i);
        self.ids.push(id.to_string());
        i
    }
}

fn data_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        out.push((n + 1, content.split_whitespace().map(str::to_string).collect()));
    }
    Ok(out)
}

/// Loads a whitespace-separated `src dst` edge list. Node ids are arbitrary
/// tokens, numbered in order of first appearance; duplicate edges collapse.
/// `#` starts a comment.
pub fn load_edge_list(path: impl AsRef<Path>, opts: &EdgeListOptions) -> Result<GraphDataset> {
    let path = path.as_ref();
    let mut nodes = Interner {
        index: HashMap::new(),
        ids: Vec::new(),
    };
    let mut edges = Vec::new();
    for (line, fields) in data_lines(path)? {
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "expected 'src dst'".into(),
            });
        }
        let (s, d) = (nodes.get(&fields[0]), nodes.get(&fields[1]));
        if s == d && !opts.allow_self_loops {
            log::warn!("{}:{line}: self-loop on '{}' dropped", path.display(), fields[0]);
            continue;
        }
        edges.push((s, d));
    }
    let mut labels = None;
    let mut label_names = Vec::new();
    if let Some(label_path) = &opts.labels {
        let mut raw = Vec::new();
        for (line, fields) in data_lines(label_path)? {
            if fields.len() < 2 {
                return Err(Error::Parse {
                    path: label_path.clone(),
                    line,
                    message: "expected 'id label'".into(),
                });
            }
            raw.push((nodes.get(&fields[0]), fields[1].clone()));
        }
        label_names = raw.iter().map(|(_, l)| l.clone()).collect();
        label_names.sort();
        label_names.dedup();
        let mut assigned = vec![None; nodes.ids.len()];
        for (node, name) in raw {
            assigned[node] = label_names.binary_search(&name).ok();
        }
        labels = Some(assigned);
    }
    let n = match opts.node_count {
        Some(count) if count < nodes.ids.len() => {
            return Err(Error::Config(format!(
                "{} has {} distinct nodes, more than the configured {count}",
                path.display(),
                nodes.ids.len()
            )))
        }
        Some(count) => count,
        None => nodes.ids.len(),
    };
    let mut node_ids = nodes.ids;
    for k in node_ids.len()..n {
        node_ids.push(format!("_{k}"));
    }
    if let Some(l) = labels.as_mut() {
        l.resize(n, None);
    }
    let mut adjacency = DenseMatrix::zeros(n, n);
    for (s, d) in edges {
        adjacency[(s, d)] = 1.0;
        if !opts.directed {
            adjacency[(d, s)] = 1.0;
        }
    }
    Ok(GraphDataset {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        adjacency,
        labels,
        label_names,
        node_ids,
    })
}

/// Writes the edges of `graph` as `src<TAB>dst` lines using its node ids.
pub fn write_edge_list(path: impl AsRef<Path>, graph: &GraphDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, row) in graph.adjacency.row_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                writeln!(w, "{}\t{}", graph.node_ids[i], graph.node_ids[j])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `id<TAB>label` lines for labeled nodes.
pub fn write_labels(path: impl AsRef<Path>, graph: &GraphDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(labels) = &graph.labels {
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                writeln!(w, "{}\t{}", graph.node_ids[i], graph.label_names[*c])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_edge() {
        let f = file("0\t1\n");
        let g = load_edge_list(f.path(), &EdgeListOptions::default()).unwrap();
        assert_eq!(g.adjacency, DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap());
        let opts = EdgeListOptions {
            directed: false,
            ..Default::default()
        };
        let u = load_edge_list(f.path(), &opts).unwrap();
        assert_eq!(u.adjacency, DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
    }

    #[test]
    fn first_appearance_order_and_comments() {
        let f = file("# header\nb a\na c  # trailing\n\nb a\n");
        let g = load_edge_list(f.path(), &EdgeListOptions::default()).unwrap();
        assert_eq!(g.node_ids, ["b", "a", "c"]);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.adjacency[(0, 1)], 1.0);
        assert_eq!(g.adjacency[(1, 2)], 1.0);
    }

    #[test]
    fn parse_error_has_line() {
        let f = file("1 2\n3\n");
        match load_edge_list(f.path(), &EdgeListOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn labels_join() {
        let edges = file("x y\ny z\n");
        let labels = file("z\tB\nx\tA\nw\tA\n");
        let opts = EdgeListOptions {
            labels: Some(labels.path().to_path_buf()),
            ..Default::default()
        };
        let g = load_edge_list(edges.path(), &opts).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.label_names, ["A", "B"]);
        assert_eq!(g.labels.clone().unwrap(), [Some(0), None, Some(1), Some(0)]);
        assert_eq!(g.labeled(), (vec![0, 2, 3], vec![0, 1, 0]));
    }

    #[test]
    fn round_trip_through_writer() {
        let f = file("p q\nq r\nr p\n");
        let g = load_edge_list(f.path(), &EdgeListOptions::default()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_edge_list(out.path(), &g).unwrap();
        let back = load_edge_list(out.path(), &EdgeListOptions::default()).unwrap();
        assert_eq!(back.adjacency, g.adjacency);
    }
}
