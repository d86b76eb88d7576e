//! Catch-up scenarios: reference growth and deficit paths, closed-loop
//! simulation around them and the debt-to-GDP proxy `d_t = D_t / xi_t`
//! with `D_{t+1} = D_t - gbar_t`.
//!
//! Balances are signed (deficit negative) and all ratios are fractions.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fimo::{build_canonical, step_dynamics, MacroParams, MacroState};
use crate::synthesis::GuaranteedSolution;
use crate::uncertainty::{Realization, UncertaintySource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthVariant {
    Moderate,
    Average,
    Strong,
}

impl GrowthVariant {
    pub const ALL: [GrowthVariant; 3] = [
        GrowthVariant::Moderate,
        GrowthVariant::Average,
        GrowthVariant::Strong,
    ];

    /// Annual nominal growth (3 % deflator on 2.5 %, 3.5 % and 5 % volume).
    pub fn rate(self) -> f64 {
        match self {
            GrowthVariant::Moderate => 0.02575,
            GrowthVariant::Average => 0.03605,
            GrowthVariant::Strong => 0.0515,
        }
    }

    pub fn digit(self) -> char {
        match self {
            GrowthVariant::Moderate => '1',
            GrowthVariant::Average => '2',
            GrowthVariant::Strong => '3',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeficitVariant {
    Tight,
    Loose,
    Populist,
}

impl DeficitVariant {
    pub const ALL: [DeficitVariant; 3] = [
        DeficitVariant::Tight,
        DeficitVariant::Loose,
        DeficitVariant::Populist,
    ];

    pub fn letter(self) -> char {
        match self {
            DeficitVariant::Tight => 'A',
            DeficitVariant::Loose => 'B',
            DeficitVariant::Populist => 'C',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthPath {
    pub variant: GrowthVariant,
    pub rate: f64,
    pub xi0_star: f64,
    pub horizon: usize,
}

impl GrowthPath {
    pub fn new(variant: GrowthVariant, xi0_star: f64, horizon: usize) -> Self {
        GrowthPath {
            variant,
            rate: variant.rate(),
            xi0_star,
            horizon,
        }
    }

    /// `xi*_0, ..., xi*_horizon`.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.horizon + 1);
        let mut v = self.xi0_star;
        for _ in 0..=self.horizon {
            out.push(v);
            v *= 1.0 + self.rate;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitPath {
    pub variant: DeficitVariant,
    /// Target balance per target GDP, one per simulated year.
    pub ratios: Vec<f64>,
    pub election_anchor: i32,
}

pub const LOOSE_OPENING: [f64; 3] = [-0.067, -0.048, -0.035];
pub const LOOSE_STEADY: f64 = -0.03;
pub const ELECTION_BALANCE: f64 = -0.045;

impl DeficitPath {
    pub fn new(
        variant: DeficitVariant,
        start_year: i32,
        horizon: usize,
        election_anchor: i32,
    ) -> Self {
        let ratios = (0..=horizon)
            .map(|t| {
                let year = start_year + t as i32;
                match variant {
                    // -3 % then half a point per year up to balance
                    DeficitVariant::Tight => (-30.0 + 5.0 * t as f64).min(0.0) / 1000.0,
                    DeficitVariant::Loose => loose(t),
                    DeficitVariant::Populist => {
                        if year >= election_anchor && (year - election_anchor) % 4 == 0 {
                            ELECTION_BALANCE
                        } else {
                            loose(t)
                        }
                    }
                }
            })
            .collect();
        DeficitPath {
            variant,
            ratios,
            election_anchor,
        }
    }
}

fn loose(t: usize) -> f64 {
    LOOSE_OPENING.get(t).copied().unwrap_or(LOOSE_STEADY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub growth: GrowthPath,
    pub deficit: DeficitPath,
    pub start_year: i32,
    /// Debt stock `D_0` in the same currency units as `xi0_star`.
    pub d0_debt: f64,
    pub x0: MacroState,
    pub realization: Realization,
}

impl ScenarioSpec {
    pub fn new(growth: GrowthVariant, deficit: DeficitVariant, base: &ScenarioBase) -> Self {
        ScenarioSpec {
            growth: GrowthPath::new(growth, base.xi0_star, base.horizon),
            deficit: DeficitPath::new(deficit, base.start_year, base.horizon, base.election_anchor),
            start_year: base.start_year,
            d0_debt: base.d0_debt,
            x0: base.x0,
            realization: base.realization.clone(),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}{}",
            self.growth.variant.digit(),
            self.deficit.variant.letter()
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0_debt > 0.0 && self.d0_debt.is_finite()) {
            return Err(Error::Config(format!(
                "D0 must be positive, got {}",
                self.d0_debt
            )));
        }
        if !(self.growth.xi0_star > 0.0 && self.growth.xi0_star.is_finite()) {
            return Err(Error::Config(format!(
                "xi0_star must be positive, got {}",
                self.growth.xi0_star
            )));
        }
        if self.growth.horizon == 0 {
            return Err(Error::Config("horizon must be at least one year".into()));
        }
        if self.deficit.ratios.len() != self.growth.horizon + 1 {
            return Err(Error::Dimension(format!(
                "deficit path has {} years, growth path {}",
                self.deficit.ratios.len(),
                self.growth.horizon + 1
            )));
        }
        Ok(())
    }
}

/// Inputs shared by all nine scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBase {
    pub start_year: i32,
    pub horizon: usize,
    pub xi0_star: f64,
    pub d0_debt: f64,
    pub election_anchor: i32,
    pub x0: MacroState,
    pub realization: Realization,
}

impl Default for ScenarioBase {
    /// Example levels in billions of forints; the debt ratio, not the
    /// levels, is what matters.
    fn default() -> Self {
        ScenarioBase {
            start_year: 2023,
            horizon: 20,
            xi0_star: 75_000.0,
            d0_debt: 55_000.0,
            election_anchor: 2026,
            x0: MacroState::new(-0.04, 0.175),
            realization: Realization::Sin,
        }
    }
}

impl ScenarioBase {
    pub fn validate(&self) -> Result<()> {
        if !self.x0.z.is_finite() || !self.x0.pi_tilde.is_finite() {
            return Err(Error::Config("x0 must be finite".into()));
        }
        ScenarioSpec::new(GrowthVariant::Moderate, DeficitVariant::Tight, self).validate()
    }
}

/// Reference target GDP and target balances.
pub fn build_reference_paths(spec: &ScenarioSpec) -> (Vec<f64>, Vec<f64>) {
    let xi = spec.growth.levels();
    let g = xi
        .iter()
        .zip(&spec.deficit.ratios)
        .map(|(x, r)| r * x)
        .collect();
    (xi, g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearRecord {
    pub year: i32,
    pub z: f64,
    pub pi_tilde: f64,
    pub g: f64,
    pub i_tilde: f64,
    pub xi_star: f64,
    pub g_star: f64,
    pub xi: f64,
    pub g_bar: f64,
    pub debt: f64,
    pub d: f64,
    pub j_fiscal: f64,
    pub j_monetary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub label: String,
    pub spec: ScenarioSpec,
    pub records: Vec<YearRecord>,
}

impl ScenarioResult {
    pub fn debt_ratios(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d).collect()
    }

    /// First year from which `|pi~| <= band` holds for the rest of the run.
    pub fn inflation_settled_year(&self, band: f64) -> Option<i32> {
        let last_out = self.records.iter().rposition(|r| r.pi_tilde.abs() > band);
        match last_out {
            None => self.records.first().map(|r| r.year),
            Some(k) => self.records.get(k + 1).map(|r| r.year),
        }
    }

    /// Smallest `rho` with `|x_t| <= |x_0| rho^t` over the run.
    pub fn decay_rate(&self) -> Option<f64> {
        let norm = |r: &YearRecord| r.z.hypot(r.pi_tilde);
        let n0 = norm(self.records.first()?);
        if n0 == 0.0 {
            return Some(0.0);
        }
        let mut rho: f64 = 0.0;
        for (t, r) in self.records.iter().enumerate().skip(1) {
            rho = rho.max((norm(r) / n0).powf(1.0 / t as f64));
        }
        Some(rho)
    }

    pub fn write_csv<W: Write>(&self, out: W, provenance: Option<&str>) -> Result<()> {
        write_records(out, provenance, &self.records)
    }
}

fn write_records<W: Write, T: Serialize>(
    mut out: W,
    provenance: Option<&str>,
    rows: &[T],
) -> Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "# {p}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the closed loop along the reference paths.
pub fn simulate_closed_loop(
    spec: &ScenarioSpec,
    sol: &GuaranteedSolution,
    params: &MacroParams,
) -> Result<ScenarioResult> {
    spec.validate()?;
    let model = build_canonical(params)?;
    sol.check_model(&model)?;
    let mut source = UncertaintySource::new(&model, spec.realization.clone())?;
    let (xi_star, g_star) = build_reference_paths(spec);
    let (k1, k2) = (sol.k1.row_slice(0), sol.k2.row_slice(0));

    let mut x = spec.x0;
    let mut debt = spec.d0_debt;
    let (mut jf, mut jm) = (0.0, 0.0);
    let mut records = Vec::with_capacity(xi_star.len());
    for t in 0..xi_star.len() {
        let xv = x.to_vec();
        let g = crate::linalg::dot(k1, &xv);
        let i_tilde = crate::linalg::dot(k2, &xv);
        let xi = xi_star[t] * (1.0 + x.z);
        let g_bar = g_star[t] + g * xi_star[t];
        jf += params.gamma1 * x.z * x.z + params.gamma2 * g * g;
        jm += params.rho1 * x.pi_tilde * x.pi_tilde + params.rho2 * i_tilde * i_tilde;
        records.push(YearRecord {
            year: spec.start_year + t as i32,
            z: x.z,
            pi_tilde: x.pi_tilde,
            g,
            i_tilde,
            xi_star: xi_star[t],
            g_star: g_star[t],
            xi,
            g_bar,
            debt,
            d: debt / xi,
            j_fiscal: jf,
            j_monetary: jm,
        });
        let p = source.next(&model, &xv);
        x = step_dynamics(params, x, g, i_tilde, p[0], p[1]);
        debt -= g_bar;
    }
    Ok(ScenarioResult {
        label: spec.label(),
        spec: spec.clone(),
        records,
    })
}

/// 1A, 1B, 1C, 2A, ..., 3C.
pub fn run_all_nine(
    base: &ScenarioBase,
    sol: &GuaranteedSolution,
    params: &MacroParams,
) -> Result<Vec<ScenarioResult>> {
    let specs: Vec<ScenarioSpec> = GrowthVariant::ALL
        .iter()
        .flat_map(|&g| DeficitVariant::ALL.iter().map(move |&d| (g, d)))
        .map(|(g, d)| ScenarioSpec::new(g, d, base))
        .collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| s.spawn(move || simulate_closed_loop(spec, sol, params)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Decreasing,
    Stabilizing,
    Increasing,
}

pub const TREND_WINDOW: usize = 5;
pub const TREND_DEADBAND: f64 = 1e-3;

/// Sign of the mean of the last five annual differences, with a dead-band.
pub fn classify_trend(series: &[f64]) -> Trend {
    if series.len() < 2 {
        return Trend::Stabilizing;
    }
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &diffs[diffs.len().saturating_sub(TREND_WINDOW)..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    if mean > TREND_DEADBAND {
        Trend::Increasing
    } else if mean < -TREND_DEADBAND {
        Trend::Decreasing
    } else {
        Trend::Stabilizing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub d_initial: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub d_final: f64,
    /// First year in which `d` is on the other side of 0.5 than the year before.
    pub crosses_half: Option<i32>,
    pub trend: Trend,
    pub inflation_in_band: Option<i32>,
}

pub fn compare_scenarios(results: &[ScenarioResult]) -> Result<Vec<ComparisonRow>> {
    if results.len() < 2 {
        return Err(Error::InsufficientData(
            "comparison needs at least two scenarios".into(),
        ));
    }
    results
        .iter()
        .map(|r| {
            let d = r.debt_ratios();
            let (first, last) = match (d.first(), d.last()) {
                (Some(&f), Some(&l)) => (f, l),
                _ => {
                    return Err(Error::InsufficientData(format!(
                        "scenario {} has no records",
                        r.label
                    )))
                }
            };
            let crosses_half = r.records.windows(2).find_map(|w| {
                let (a, b) = (w[0].d - 0.5, w[1].d - 0.5);
                (a != 0.0 && (a.signum() != b.signum() || b == 0.0)).then_some(w[1].year)
            });
            Ok(ComparisonRow {
                label: r.label.clone(),
                d_initial: first,
                d_min: d.iter().copied().fold(f64::INFINITY, f64::min),
                d_max: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                d_final: last,
                crosses_half,
                trend: classify_trend(&d),
                inflation_in_band: r.inflation_settled_year(0.01),
            })
        })
        .collect()
}

pub fn write_comparison_csv<W: Write>(
    out: W,
    rows: &[ComparisonRow],
    provenance: Option<&str>,
) -> Result<()> {
    write_records(out, provenance, rows)
}

/// Line chart of `d_t` for the given scenarios (one deficit family).
pub fn render_svg(results: &[&ScenarioResult], title: &str, provenance: Option<&str>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 56.0;
    const COLOURS: [&str; 6] = [
        "#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#66456b", "#00798c",
    ];

    let all: Vec<(i32, f64)> = results
        .iter()
        .flat_map(|r| r.records.iter().map(|x| (x.year, x.d)))
        .collect();
    let (y0, y1) = all
        .iter()
        .fold((i32::MAX, i32::MIN), |(a, b), &(y, _)| (a.min(y), b.max(y)));
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, d)| {
            (a.min(d), b.max(d))
        });
    if all.is_empty() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.05;
        hi += 0.05;
    }
    let span_years = (y1 - y0).max(1) as f64;
    let px = |year: i32| PAD + (year - y0) as f64 / span_years * (W - 2.0 * PAD);
    let py = |d: f64| H - PAD - (d - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    if let Some(p) = provenance {
        let _ = writeln!(s, "<!-- {} -->", p.replace("--", "- -"));
    }
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{:.1}%</text>"##,
            W - PAD,
            PAD - 6.0,
            y + 4.0,
            100.0 * v
        );
    }
    let step = ((y1 - y0) / 5).max(1);
    let mut year = y0;
    while year <= y1 {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{year}</text>"#,
            px(year),
            H - PAD + 18.0
        );
        year += step;
    }
    if lo < 0.5 && hi > 0.5 {
        let y = py(0.5);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            W - PAD
        );
    }
    for (k, r) in results.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let pts: Vec<String> = r
            .records
            .iter()
            .map(|x| format!("{:.2},{:.2}", px(x.year), py(x.d)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - PAD - 60.0,
            W - PAD - 40.0,
            W - PAD - 34.0,
            ly + 4.0,
            escape(&r.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{synthesize, SynthesisOptions};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn solution() -> &'static GuaranteedSolution {
        static SOL: OnceLock<GuaranteedSolution> = OnceLock::new();
        SOL.get_or_init(|| {
            let m = build_canonical(&MacroParams::default()).unwrap();
            synthesize(&m, &[-0.04, 0.175], &SynthesisOptions::default()).unwrap()
        })
    }

    #[test]
    fn reference_paths() {
        let g = GrowthPath::new(GrowthVariant::Moderate, 100.0, 3);
        assert!((g.levels()[1] - 102.575).abs() < 1e-12);
        let tight = DeficitPath::new(DeficitVariant::Tight, 2023, 9, 2026);
        assert_eq!(
            tight.ratios,
            vec![-0.03, -0.025, -0.02, -0.015, -0.01, -0.005, 0.0, 0.0, 0.0, 0.0]
        );
        let loose = DeficitPath::new(DeficitVariant::Loose, 2023, 5, 2026);
        assert_eq!(
            loose.ratios,
            vec![-0.067, -0.048, -0.035, -0.03, -0.03, -0.03]
        );
        let pop = DeficitPath::new(DeficitVariant::Populist, 2023, 12, 2026);
        for (t, r) in pop.ratios.iter().enumerate() {
            let year = 2023 + t as i32;
            if [2026, 2030, 2034].contains(&year) {
                assert_eq!(*r, -0.045);
            } else {
                assert_eq!(*r, loose_at(t));
            }
        }
    }

    fn loose_at(t: usize) -> f64 {
        DeficitPath::new(DeficitVariant::Loose, 2023, t, 2026).ratios[t]
    }

    #[test]
    fn zero_start_tracks_the_reference() {
        let base = ScenarioBase {
            x0: MacroState::new(0.0, 0.0),
            realization: Realization::Sin,
            ..ScenarioBase::default()
        };
        let spec = ScenarioSpec::new(GrowthVariant::Average, DeficitVariant::Loose, &base);
        let r = simulate_closed_loop(&spec, solution(), &MacroParams::default()).unwrap();
        for rec in &r.records {
            assert_eq!(
                (rec.z, rec.pi_tilde, rec.j_fiscal, rec.j_monetary),
                (0.0, 0.0, 0.0, 0.0)
            );
            assert_eq!(rec.xi, rec.xi_star);
            assert_eq!(rec.g_bar, rec.g_star);
        }
    }

    #[test]
    fn bookkeeping_is_exact() {
        let base = ScenarioBase::default();
        for (g, d) in [
            (GrowthVariant::Moderate, DeficitVariant::Tight),
            (GrowthVariant::Strong, DeficitVariant::Populist),
        ] {
            let spec = ScenarioSpec::new(g, d, &base);
            let r = simulate_closed_loop(&spec, solution(), &MacroParams::default()).unwrap();
            let mut sum = 0.0;
            for (t, rec) in r.records.iter().enumerate() {
                let expected = spec.d0_debt - sum;
                assert!((rec.debt - expected).abs() <= 1e-9 * expected.abs());
                assert_eq!(rec.d, rec.debt / rec.xi);
                if t > 0 {
                    assert!(rec.j_fiscal >= r.records[t - 1].j_fiscal);
                    assert!(rec.j_monetary >= r.records[t - 1].j_monetary);
                }
                sum += rec.g_bar;
            }
        }
    }

    #[test]
    fn balanced_budget_keeps_debt_constant() {
        let base = ScenarioBase {
            x0: MacroState::new(0.0, 0.0),
            ..ScenarioBase::default()
        };
        let mut spec = ScenarioSpec::new(GrowthVariant::Strong, DeficitVariant::Tight, &base);
        spec.deficit.ratios.iter_mut().for_each(|r| *r = 0.0);
        let r = simulate_closed_loop(&spec, solution(), &MacroParams::default()).unwrap();
        for w in r.records.windows(2) {
            assert_eq!(w[1].debt, w[0].debt);
            assert!(w[1].d < w[0].d);
        }
    }

    #[test]
    fn nine_labels_and_growth_ordering() {
        let results = run_all_nine(
            &ScenarioBase::default(),
            solution(),
            &MacroParams::default(),
        )
        .unwrap();
        let labels: Vec<&str> = results.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            ["1A", "1B", "1C", "2A", "2B", "2C", "3A", "3B", "3C"]
        );
        for fam in 0..3 {
            let (m, a, s) = (&results[fam], &results[3 + fam], &results[6 + fam]);
            for t in 1..m.records.len() {
                assert!(s.records[t].d <= a.records[t].d && a.records[t].d <= m.records[t].d);
            }
        }
    }

    #[test]
    fn trend_examples() {
        assert_eq!(classify_trend(&[0.6, 0.55, 0.5, 0.45]), Trend::Decreasing);
        assert_eq!(classify_trend(&[0.5; 8]), Trend::Stabilizing);
        assert_eq!(classify_trend(&[0.5, 0.6]), Trend::Increasing);
        assert_eq!(classify_trend(&[0.5]), Trend::Stabilizing);
    }

    #[test]
    fn comparison_needs_two_results() {
        let spec = ScenarioSpec::new(
            GrowthVariant::Strong,
            DeficitVariant::Loose,
            &ScenarioBase::default(),
        );
        let r = simulate_closed_loop(&spec, solution(), &MacroParams::default()).unwrap();
        assert!(compare_scenarios(std::slice::from_ref(&r)).is_err());
        let rows = compare_scenarios(&[r.clone(), r]).unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn outputs_are_deterministic() {
        let base = ScenarioBase {
            realization: Realization::RandomAdmissible { seed: 11 },
            ..ScenarioBase::default()
        };
        let render = || {
            let rs = run_all_nine(&base, solution(), &MacroParams::default()).unwrap();
            let mut buf = Vec::new();
            for r in &rs {
                r.write_csv(&mut buf, Some("seed=11")).unwrap();
            }
            let refs: Vec<&ScenarioResult> = rs.iter().collect();
            buf.extend(render_svg(&refs, "all", None).into_bytes());
            buf
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn steady_debt_ratio_is_stabilizing() {
        // constant 3 % deficit at 5.15 % growth settles at 0.03 / 0.0515
        let base = ScenarioBase {
            x0: MacroState::new(0.0, 0.0),
            d0_debt: 75_000.0 * 0.03 / 0.0515,
            horizon: 30,
            ..ScenarioBase::default()
        };
        let results = run_all_nine(&base, solution(), &MacroParams::default()).unwrap();
        let rows = compare_scenarios(&results).unwrap();
        let row = rows.iter().find(|r| r.label == "3B").unwrap();
        assert_eq!(row.trend, Trend::Stabilizing, "{row:?}");
        assert!((row.d_final - 0.5825).abs() < 0.03, "{row:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn bookkeeping_and_convergence_hold_for_any_scenario(
            g in 0usize..3,
            d in 0usize..3,
            seed in any::<u64>(),
            d0 in 1e3f64..1e6,
            xi0 in 1e3f64..1e6,
            z0 in -0.2f64..0.2,
            pi0 in -0.3f64..0.3,
        ) {
            let base = ScenarioBase {
                d0_debt: d0,
                xi0_star: xi0,
                x0: MacroState::new(z0, pi0),
                realization: Realization::RandomAdmissible { seed },
                ..ScenarioBase::default()
            };
            let spec = ScenarioSpec::new(GrowthVariant::ALL[g], DeficitVariant::ALL[d], &base);
            let r = simulate_closed_loop(&spec, solution(), &MacroParams::default()).unwrap();
            let n = r.records.len();
            let spent: f64 = r.records[..n - 1].iter().map(|x| x.g_bar).sum();
            let expected = d0 - spent;
            prop_assert!((r.records[n - 1].debt - expected).abs() <= 1e-9 * expected.abs().max(d0));
            for w in r.records.windows(2) {
                prop_assert!(w[1].j_fiscal >= w[0].j_fiscal && w[1].j_monetary >= w[0].j_monetary);
            }
            let rho = r.decay_rate().unwrap();
            prop_assert!(rho < 1.0, "decay rate {rho}");
            prop_assert!(r.inflation_settled_year(0.01).is_some());
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = ScenarioBase {
            d0_debt: 0.0,
            ..ScenarioBase::default()
        };
        let spec = ScenarioSpec::new(GrowthVariant::Strong, DeficitVariant::Loose, &base);
        assert!(matches!(
            simulate_closed_loop(&spec, solution(), &MacroParams::default()),
            Err(Error::Config(_))
        ));
    }
}
