//! Run reports, CSV/JSON output and comparison tables.

use crate::adaptive::{GenericCalibration, PathPoint};
use crate::linalg::{gauss_seidel, norm2, DenseMatrix};
use crate::pipeline::RunConfig;
use crate::pse::BifurcationRecord;
use crate::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Adaptive,
    Traditional,
}

impl TrackerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackerKind::Adaptive => "adaptive",
            TrackerKind::Traditional => "traditional",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport<S> {
    pub id: usize,
    /// Branch whose bifurcation seeded this one.
    pub parent: Option<usize>,
    /// Continues the parent through the bifurcation rather than switching.
    pub straight: bool,
    pub depth: usize,
    pub points: Vec<PathPoint<S>>,
    /// Always `points.len() − 1`.
    pub steps: usize,
    pub stop: String,
    pub folds: usize,
    pub inflation_steps: usize,
    pub wall_time_s: f64,
}

impl<S: Scalar> BranchReport<S> {
    pub fn new(id: usize, parent: Option<usize>, straight: bool, depth: usize) -> Self {
        Self {
            id,
            parent,
            straight,
            depth,
            points: Vec::new(),
            steps: 0,
            stop: String::new(),
            folds: 0,
            inflation_steps: 0,
            wall_time_s: 0.0,
        }
    }

    /// Appends points, renumbering them along the branch.
    pub fn extend(&mut self, pts: impl IntoIterator<Item = PathPoint<S>>) {
        for mut p in pts {
            p.index = self.points.len();
            self.points.push(p);
        }
        self.steps = self.points.len().saturating_sub(1);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport<S> {
    pub problem: String,
    pub tracker: TrackerKind,
    pub config: RunConfig<S>,
    pub branches: Vec<BranchReport<S>>,
    pub bifurcations: Vec<BifurcationRecord<S>>,
    pub calibration: Option<GenericCalibration<S>>,
    pub total_steps: usize,
    pub wall_time_s: f64,
    /// Set when the run ended on a numerical failure; the rest is partial.
    pub failure: Option<String>,
}

impl<S: Scalar> RunReport<S> {
    pub fn new(tracker: TrackerKind, config: RunConfig<S>) -> Self {
        Self {
            problem: config.problem.clone(),
            tracker,
            config,
            branches: Vec::new(),
            bifurcations: Vec::new(),
            calibration: None,
            total_steps: 0,
            wall_time_s: 0.0,
            failure: None,
        }
    }

    pub fn finish(&mut self, wall_time_s: f64) {
        self.total_steps = self.branches.iter().map(|b| b.steps).sum();
        self.wall_time_s = wall_time_s;
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub const CSV_HEADER: &str = "index,p,lambda_min,residual,u_norm";

/// Path CSV; `full_state` appends `u0..u{n-1}` columns.
pub fn write_path_csv<S: Scalar, W: Write>(out: &mut W, branch: &BranchReport<S>, full_state: bool) -> io::Result<()> {
    let n = branch.points.first().map_or(0, |p| p.u.len());
    let mut header = CSV_HEADER.to_string();
    if full_state {
        for i in 0..n {
            write!(header, ",u{i}").expect("string write");
        }
    }
    writeln!(out, "{header}")?;
    for pt in &branch.points {
        let f = crate::to_f64::<S>;
        let mut line = format!(
            "{},{},{},{},{}",
            pt.index,
            fmt17(f(pt.p)),
            fmt17(f(pt.lambda_min)),
            fmt17(f(pt.residual)),
            fmt17(f(norm2(&pt.u)))
        );
        if full_state {
            for &x in &pt.u {
                line.push(',');
                line.push_str(&fmt17(f(x)));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Writes `path-<id>.csv` for every branch. Returns the file names.
pub fn write_branch_files<S: Scalar>(dir: &Path, report: &RunReport<S>, full_state: bool) -> io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for b in &report.branches {
        let name = format!("path-{}.csv", b.id);
        let mut f = io::BufWriter::new(std::fs::File::create(dir.join(&name))?);
        write_path_csv(&mut f, b, full_state)?;
        f.flush()?;
        names.push(name);
    }
    Ok(names)
}

/// One row of a tracker comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub tracker: TrackerKind,
    pub h: f64,
    pub branch: usize,
    pub steps: usize,
    pub wall_time_s: f64,
    pub stop: String,
    /// `(u, p)` of the first bifurcation estimate on the branch, if any.
    pub bifurcation: Option<(Vec<f64>, f64)>,
    pub endpoint: (Vec<f64>, f64),
    pub note: Option<String>,
}

pub fn comparison_rows<S: Scalar>(report: &RunReport<S>, h: f64) -> Vec<ComparisonRow> {
    let f = crate::to_f64::<S>;
    report
        .branches
        .iter()
        .map(|b| {
            let bif = report
                .bifurcations
                .iter()
                .find(|r| r.branch == b.id)
                .map(|r| (r.u_b.iter().map(|&x| f(x)).collect(), f(r.p_b)));
            let end = b.points.last().map(|p| (p.u.iter().map(|&x| f(x)).collect(), f(p.p))).unwrap_or_default();
            ComparisonRow {
                tracker: report.tracker,
                h,
                branch: b.id,
                steps: b.steps,
                wall_time_s: b.wall_time_s,
                stop: b.stop.clone(),
                bifurcation: bif,
                endpoint: end,
                note: report.failure.clone(),
            }
        })
        .collect()
}

fn short_vec(v: &[f64]) -> String {
    if v.len() > 4 {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        return format!("|u|={n:.4e}");
    }
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("({})", parts.join(", "))
}

pub const COMPARISON_CSV_HEADER: &str = "tracker,h,branch,steps,wall_time_s,stop,bif_p,bif_u_norm,end_p,end_u_norm,note";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from(COMPARISON_CSV_HEADER);
    s.push('\n');
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for r in rows {
        let (bp, bu) = match &r.bifurcation {
            Some((u, p)) => (fmt17(*p), fmt17(norm(u))),
            None => (String::new(), String::new()),
        };
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.tracker.as_str(),
            fmt17(r.h),
            r.branch,
            r.steps,
            fmt17(r.wall_time_s),
            r.stop,
            bp,
            bu,
            fmt17(r.endpoint.1),
            fmt17(norm(&r.endpoint.0)),
            r.note.as_deref().unwrap_or("").replace(',', ";")
        )
        .expect("string write");
    }
    s
}

pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let mut s = format!(
        "{:<12} {:>8} {:>6} {:>7} {:>10}  {:<14} {:<36} {}\n",
        "tracker", "h", "branch", "steps", "time[s]", "stop", "bifurcation (u; p)", "endpoint (u; p)"
    );
    for r in rows {
        let bif = r.bifurcation.as_ref().map(|(u, p)| format!("{}; {p:.4e}", short_vec(u))).unwrap_or_else(|| "-".into());
        let end = format!("{}; {:.4e}", short_vec(&r.endpoint.0), r.endpoint.1);
        writeln!(
            s,
            "{:<12} {:>8} {:>6} {:>7} {:>10.4}  {:<14} {:<36} {}",
            r.tracker.as_str(),
            r.h,
            r.branch,
            r.steps,
            r.wall_time_s,
            r.stop,
            bif,
            end
        )
        .expect("string write");
        if let Some(n) = &r.note {
            writeln!(s, "    failure: {n}").expect("string write");
        }
    }
    s
}

/// The 3×3 singular matrix and consistent right-hand side of the
/// Gauss–Seidel conditioning experiment.
pub fn gs_problem() -> (DenseMatrix<f64>, Vec<f64>) {
    let a = DenseMatrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]);
    (a, vec![-1.0, -1.0, 2.0])
}

pub const GS_EPSILONS: [f64; 6] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 0.0];

/// Forward Gauss–Seidel on `A + εI` from `x0 = b` to `‖(A + εI)x − b‖₂ ≤ 1e−8`.
pub fn gs_table() -> Vec<(f64, Option<usize>)> {
    let (a, b) = gs_problem();
    GS_EPSILONS
        .iter()
        .map(|&eps| {
            let m = a.add_diag(eps);
            let it = gauss_seidel(&m, &b, &b, &m, 1e-8, 1_000_000).ok().map(|r| r.iterations);
            (eps, it)
        })
        .collect()
}

pub fn gs_table_text(rows: &[(f64, Option<usize>)]) -> String {
    let mut s = String::from("epsilon   iterations\n");
    for (eps, it) in rows {
        let it = it.map(|k| k.to_string()).unwrap_or_else(|| "no convergence".into());
        writeln!(s, "{:<9} {}", if *eps == 0.0 { "0".to_string() } else { format!("{eps:e}") }, it).expect("string write");
    }
    s
}
