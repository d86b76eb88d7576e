//! OLS estimation of the dynamic-equation coefficients from annual series.
//!
//! Expectations are proxied by current values, `E[pi_{t+1}] ~ pi_t` and
//! `E[z_{t+1}] ~ z_t`, which gives the regressions
//!
//! ```text
//! z_{t+1}          = -alpha1 (i_t - pi_t) - alpha2 g_t
//! pi_{t+1} - pi_t  =  beta1 z_t + beta2 (i_t - i*)
//! ```
//!
//! Each observation pairs year `t` with year `t + 1`; it is dropped if either
//! year falls in an excluded range.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse, numerical_rank, solve_linear, Matrix};

pub const DEFAULT_EXCLUSIONS: [(i32, i32); 2] = [(2008, 2009), (2020, 2021)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    years: Vec<i32>,
    names: Vec<String>,
    /// Column-major values, `None` for missing cells.
    columns: Vec<Vec<Option<f64>>>,
}

impl TimeSeriesTable {
    pub fn new(years: Vec<i32>, columns: Vec<(String, Vec<Option<f64>>)>) -> Result<Self> {
        if years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("years must be strictly increasing".into()));
        }
        let mut seen = HashSet::new();
        for (name, col) in &columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("duplicate column {name:?}")));
            }
            if col.len() != years.len() {
                return Err(Error::Dimension(format!(
                    "column {name:?} has {} cells for {} years",
                    col.len(),
                    years.len()
                )));
            }
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(TimeSeriesTable {
            years,
            names,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    fn require(&self, name: &str) -> Result<&[Option<f64>]> {
        self.column(name)
            .ok_or_else(|| Error::Config(format!("table has no column {name:?}")))
    }

    fn row_of(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }
}

/// Reads a CSV whose first column holds the year.
pub fn load_table(path: impl AsRef<Path>) -> Result<TimeSeriesTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_table(file)
}

pub fn read_table<R: Read>(reader: R) -> Result<TimeSeriesTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers().map_err(parse_error)?.clone();
    if header.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut years = Vec::new();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(parse_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let year: i32 = rec[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("year {:?} is not an integer", &rec[0]),
        })?;
        if years.last().is_some_and(|&last| year <= last) {
            return Err(Error::Parse {
                line,
                message: format!("year {year} is not after the previous row"),
            });
        }
        years.push(year);
        for (col, cell) in columns.iter_mut().zip(rec.iter().skip(1)) {
            col.push(cell.parse::<f64>().ok().filter(|v| v.is_finite()));
        }
    }
    let mut seen = HashSet::new();
    if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(Error::Parse {
            line: 1,
            message: format!("duplicate column {dup:?}"),
        });
    }
    Ok(TimeSeriesTable {
        years,
        names,
        columns,
    })
}

fn parse_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn excluded(year: i32, ranges: &[(i32, i32)]) -> bool {
    ranges.iter().any(|&(a, b)| (a..=b).contains(&year))
}

pub fn exclude_years(t: &TimeSeriesTable, ranges: &[(i32, i32)]) -> TimeSeriesTable {
    let keep: Vec<usize> = (0..t.len())
        .filter(|&k| !excluded(t.years[k], ranges))
        .collect();
    TimeSeriesTable {
        years: keep.iter().map(|&k| t.years[k]).collect(),
        names: t.names.clone(),
        columns: t
            .columns
            .iter()
            .map(|c| keep.iter().map(|&k| c[k]).collect())
            .collect(),
    }
}

/// Parses `2008-2009,2020-2021`; a single year stands for itself.
pub fn parse_ranges(s: &str) -> Result<Vec<(i32, i32)>> {
    let bad = |part: &str| Error::Config(format!("bad year range {part:?}"));
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let (a, b) = part.split_once('-').unwrap_or((part, part));
            let a: i32 = a.trim().parse().map_err(|_| bad(part))?;
            let b: i32 = b.trim().parse().map_err(|_| bad(part))?;
            if a > b {
                return Err(bad(part));
            }
            Ok((a, b))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationOptions {
    pub z_column: String,
    pub i_column: String,
    pub pi_column: String,
    pub g_column: String,
    pub i_star: f64,
    pub exclude: Vec<(i32, i32)>,
    pub intercept: bool,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        EstimationOptions {
            z_column: "z".into(),
            i_column: "i".into(),
            pi_column: "pi".into(),
            g_column: "g".into(),
            i_star: 0.03,
            exclude: DEFAULT_EXCLUSIONS.to_vec(),
            intercept: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub equation: String,
    /// Raw regression coefficients, in regressor order.
    pub coefficients: Vec<Coefficient>,
    /// Centred if an intercept is fitted, uncentred otherwise.
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub years_used: Vec<i32>,
    pub rows_used: usize,
    pub rows_excluded: usize,
    pub excluded_ranges: Vec<(i32, i32)>,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for OlsFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.equation)?;
        for c in &self.coefficients {
            writeln!(
                f,
                "  {:<10} {:>12.6}  (se {:.6})",
                c.name, c.estimate, c.std_error
            )?;
        }
        writeln!(
            f,
            "  R^2 {:.4}, {} observations used, {} excluded",
            self.r_squared, self.rows_used, self.rows_excluded
        )?;
        let ranges: Vec<String> = self
            .excluded_ranges
            .iter()
            .map(|(a, b)| format!("{a}-{b}"))
            .collect();
        write!(
            f,
            "  excluded years: {}",
            if ranges.is_empty() {
                "none".into()
            } else {
                ranges.join(",")
            }
        )
    }
}

/// Ordinary least squares through the normal equations.
pub fn ols(
    x: &Matrix,
    y: &[f64],
    names: &[&str],
    centred_r2: bool,
) -> Result<(Vec<Coefficient>, f64, Vec<f64>)> {
    let (n, k) = x.shape();
    if y.len() != n || names.len() != k {
        return Err(Error::Dimension(format!(
            "{n}x{k} design, {} responses",
            y.len()
        )));
    }
    if n < k + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {k} regressors, need at least {}",
            k + 2
        )));
    }
    if numerical_rank(x, 1e-10) < k {
        return Err(Error::Collinear(format!("regressors {}", names.join(", "))));
    }
    let xt = x.transpose();
    let xtx = xt.matmul(x)?;
    let xty = Matrix::column(&xt.mul_vec(y));
    let beta = solve_linear(&xtx, &xty)?.col_vec(0);
    let fitted = x.mul_vec(&beta);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = if centred_r2 {
        y.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let s2 = rss / (n - k) as f64;
    let cov = inverse(&xtx)?;
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            name: name.to_string(),
            estimate: beta[j],
            std_error: (s2 * cov[(j, j)]).max(0.0).sqrt(),
        })
        .collect();
    Ok((coefficients, r_squared, residuals))
}

struct Obs {
    year: i32,
    x: Vec<f64>,
    y: f64,
}

fn regress(
    t: &TimeSeriesTable,
    opts: &EstimationOptions,
    equation: &str,
    names: &[&str],
    build: impl Fn(usize, usize) -> Option<(Vec<f64>, f64)>,
) -> Result<OlsFit> {
    let mut used = Vec::new();
    let mut rows_excluded = 0;
    for (k, &year) in t.years.iter().enumerate() {
        let Some(next) = t.row_of(year + 1) else {
            continue;
        };
        let Some((x, y)) = build(k, next) else {
            continue;
        };
        if excluded(year, &opts.exclude) || excluded(year + 1, &opts.exclude) {
            rows_excluded += 1;
        } else {
            used.push(Obs { year, x, y });
        }
    }
    let mut names = names.to_vec();
    if opts.intercept {
        names.push("intercept");
    }
    let k = names.len();
    let mut data = Vec::with_capacity(used.len() * k);
    for o in &used {
        data.extend_from_slice(&o.x);
        if opts.intercept {
            data.push(1.0);
        }
    }
    if used.len() < k + 2 {
        return Err(Error::InsufficientData(format!(
            "{equation}: {} usable observations for {k} regressors",
            used.len()
        )));
    }
    let x = Matrix::from_vec(used.len(), k, data)?;
    let y: Vec<f64> = used.iter().map(|o| o.y).collect();
    let (coefficients, r_squared, residuals) = ols(&x, &y, &names, opts.intercept)?;
    Ok(OlsFit {
        equation: equation.into(),
        coefficients,
        r_squared,
        residuals,
        years_used: used.iter().map(|o| o.year).collect(),
        rows_used: used.len(),
        rows_excluded,
        excluded_ranges: opts.exclude.clone(),
    })
}

/// `z_{t+1}` on `(i_t - pi_t)` and `g_t`; the coefficients estimate
/// `-alpha1` and `-alpha2`.
pub fn fit_real_sphere(t: &TimeSeriesTable, opts: &EstimationOptions) -> Result<OlsFit> {
    let (z, i, pi, g) = (
        t.require(&opts.z_column)?,
        t.require(&opts.i_column)?,
        t.require(&opts.pi_column)?,
        t.require(&opts.g_column)?,
    );
    regress(
        t,
        opts,
        "z[t+1] = c1 (i[t] - pi[t]) + c2 g[t]",
        &["c1", "c2"],
        |k, n| Some((vec![i[k]? - pi[k]?, g[k]?], z[n]?)),
    )
}

/// `pi_{t+1} - pi_t` on `z_t` and `(i_t - i*)`; the coefficients estimate
/// `beta1` and `beta2`.
pub fn fit_monetary(t: &TimeSeriesTable, opts: &EstimationOptions) -> Result<OlsFit> {
    let (z, i, pi) = (
        t.require(&opts.z_column)?,
        t.require(&opts.i_column)?,
        t.require(&opts.pi_column)?,
    );
    let i_star = opts.i_star;
    regress(
        t,
        opts,
        "pi[t+1] - pi[t] = beta1 z[t] + beta2 (i[t] - i*)",
        &["beta1", "beta2"],
        |k, n| Some((vec![z[k]?, i[k]? - i_star], pi[n]? - pi[k]?)),
    )
}

/// Both fits with the structural coefficients in the model's sign
/// convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub real_sphere: OlsFit,
    pub monetary: OlsFit,
}

pub fn estimate_all(t: &TimeSeriesTable, opts: &EstimationOptions) -> Result<EstimationReport> {
    let real_sphere = fit_real_sphere(t, opts)?;
    let monetary = fit_monetary(t, opts)?;
    Ok(EstimationReport {
        alpha1: -real_sphere.coefficients[0].estimate,
        alpha2: -real_sphere.coefficients[1].estimate,
        beta1: monetary.coefficients[0].estimate,
        beta2: monetary.coefficients[1].estimate,
        real_sphere,
        monetary,
    })
}

impl fmt::Display for EstimationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "alpha1 = {:.6}, alpha2 = {:.6}, beta1 = {:.6}, beta2 = {:.6}",
            self.alpha1, self.alpha2, self.beta1, self.beta2
        )?;
        writeln!(f, "{}", self.real_sphere)?;
        write!(f, "{}", self.monetary)
    }
}

/// Synthetic series generated from the regression equations; `noise` is
/// called once per equation and year.
pub fn synthetic_table(
    alpha: (f64, f64),
    beta: (f64, f64),
    i_star: f64,
    first_year: i32,
    years: usize,
    mut exogenous: impl FnMut(usize) -> (f64, f64),
    mut noise: impl FnMut() -> f64,
) -> TimeSeriesTable {
    let (mut z, mut pi) = (0.01, 0.04);
    let mut cols: Vec<Vec<Option<f64>>> = (0..4).map(|_| Vec::with_capacity(years)).collect();
    for t in 0..years {
        let (i, g) = exogenous(t);
        for (c, v) in cols.iter_mut().zip([z, i, pi, g]) {
            c.push(Some(v));
        }
        let z_next = -alpha.0 * (i - pi) - alpha.1 * g + noise();
        let pi_next = pi + beta.0 * z + beta.1 * (i - i_star) + noise();
        (z, pi) = (z_next, pi_next);
    }
    let names = ["z", "i", "pi", "g"].map(String::from);
    TimeSeriesTable::new(
        (0..years).map(|t| first_year + t as i32).collect(),
        names.into_iter().zip(cols).collect(),
    )
    .expect("generated table is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exo(seed: u64) -> impl FnMut(usize) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        move |_| (rng.gen_range(0.0..0.12), rng.gen_range(-0.08..0.0))
    }

    #[test]
    fn load_examples() {
        let t = read_table("year,z,i\n2001,0.1,0.05\n2002,,0.04\n2003,0.2,x\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.column("z").unwrap(), &[Some(0.1), None, Some(0.2)]);
        assert_eq!(t.column("i").unwrap()[2], None);

        let empty = read_table("year,z,i,pi,g\n".as_bytes()).unwrap();
        assert!(empty.is_empty());
        assert!(matches!(
            fit_real_sphere(&empty, &EstimationOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn malformed_csv_reports_line() {
        let err = read_table("year,z\n2001,0.1\n2002,0.2,9\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_table("year,z\n2001,0.1\n2001,0.2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            read_table("year,z,z\n2001,1,2\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn exclusion_examples() {
        let t = synthetic_table((0.16, 0.19), (0.699, 0.433), 0.03, 2005, 19, exo(1), || 0.0);
        assert_eq!(exclude_years(&t, &DEFAULT_EXCLUSIONS).len(), 15);
        assert_eq!(exclude_years(&t, &[]), t);
        assert!(exclude_years(&t, &[(1900, 2100)]).is_empty());
        assert_eq!(
            parse_ranges("2008-2009, 2020-2021").unwrap(),
            DEFAULT_EXCLUSIONS
        );
        assert_eq!(parse_ranges("2015").unwrap(), [(2015, 2015)]);
        assert!(parse_ranges("2010-2009").is_err());
    }

    #[test]
    fn observation_accounting() {
        let t = synthetic_table((0.16, 0.19), (0.699, 0.433), 0.03, 2005, 19, exo(2), || 0.0);
        let fit = fit_real_sphere(&t, &EstimationOptions::default()).unwrap();
        // 18 year pairs; 2007-08, 08-09, 09-10, 19-20, 20-21, 21-22 touch a crisis year
        assert_eq!(fit.rows_used + fit.rows_excluded, 18);
        assert_eq!(fit.rows_excluded, 6);
        assert!(!fit.years_used.contains(&2008));
    }

    #[test]
    fn noiseless_recovery() {
        let t = synthetic_table((0.16, 0.19), (0.699, 0.433), 0.03, 1990, 40, exo(3), || 0.0);
        let r = estimate_all(&t, &EstimationOptions::default()).unwrap();
        for (got, want) in [
            (r.alpha1, 0.16),
            (r.alpha2, 0.19),
            (r.beta1, 0.699),
            (r.beta2, 0.433),
        ] {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!(r.real_sphere.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn collinear_design_is_rejected() {
        let years: Vec<i32> = (2000..2012).collect();
        let col = |f: &dyn Fn(f64) -> f64| years.iter().map(|&y| Some(f(y as f64))).collect();
        let t = TimeSeriesTable::new(
            years.clone(),
            vec![
                ("z".into(), col(&|y| (y * 0.7).sin())),
                ("i".into(), col(&|y| 0.01 * (y - 2000.0))),
                ("pi".into(), col(&|_| 0.0)),
                ("g".into(), col(&|y| -0.02 * (y - 2000.0))),
            ],
        )
        .unwrap();
        let opts = EstimationOptions {
            exclude: vec![],
            ..EstimationOptions::default()
        };
        assert!(matches!(
            fit_real_sphere(&t, &opts),
            Err(Error::Collinear(_))
        ));
    }

    #[test]
    fn intercept_flag_adds_a_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = synthetic_table(
            (0.16, 0.19),
            (0.699, 0.433),
            0.03,
            1980,
            40,
            exo(4),
            move || rng.gen_range(-1e-3..1e-3),
        );
        let opts = EstimationOptions {
            intercept: true,
            ..EstimationOptions::default()
        };
        let fit = fit_monetary(&t, &opts).unwrap();
        assert_eq!(fit.coefficients.len(), 3);
        assert!(fit.coefficient("intercept").unwrap().estimate.abs() < 5e-3);
    }

    proptest! {
        #[test]
        fn normal_equations_hold(seed in any::<u64>(), n in 6usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = Matrix::from_vec(n, 3, data).unwrap();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, _, res) = ols(&x, &y, &["a", "b", "c"], false).unwrap();
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..3 {
                let col = x.col_vec(j);
                let cnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                let g = crate::linalg::dot(&col, &res);
                prop_assert!(g.abs() <= 1e-10 * cnorm * ynorm);
            }
        }

        #[test]
        fn exclusion_is_idempotent(a in 1995i32..2030, len in 0i32..6, b in 1995i32..2030) {
            let t = synthetic_table((0.16, 0.19), (0.7, 0.4), 0.03, 2000, 24, exo(5), || 0.0);
            let ranges = [(a, a + len), (b, b)];
            let once = exclude_years(&t, &ranges);
            prop_assert_eq!(exclude_years(&once, &ranges), once);
        }
    }
}
