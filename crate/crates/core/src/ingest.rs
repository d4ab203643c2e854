//! Raw panels to functional time series, CSV exchange formats and plot data.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flp::IrfInference;
use crate::hilbert::{BasisSpec, FunctionElement};

/// Default probability grid: 101 equispaced points in `[0.005, 0.995]`.
pub fn default_probs() -> Vec<f64> {
    BasisSpec::equispaced(0.005, 0.995, 101)
}

/// Round to 12 significant digits and print the shortest representation.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// High-frequency observations in time order.
#[derive(Debug, Clone, Default)]
pub struct RawPanel {
    pub timestamps: Vec<String>,
    pub values: Vec<f64>,
}

impl RawPanel {
    /// Two-column CSV `(timestamp, value)` with a header row.
    pub fn read_long_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows: Vec<(String, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Data(format!("line {}: expected timestamp and value", i + 2)));
            }
            let v: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("line {}: value {:?} is not a number", i + 2, &rec[1])))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("line {}: non-finite value", i + 2)));
            }
            rows.push((rec[0].trim().to_string(), v));
        }
        let numeric = rows.iter().all(|(t, _)| t.parse::<f64>().is_ok());
        if numeric {
            rows.sort_by(|a, b| a.0.parse::<f64>().unwrap().total_cmp(&b.0.parse::<f64>().unwrap()));
        } else {
            rows.sort_by(|a, b| a.0.cmp(&b.0));
        }
        let (timestamps, values) = rows.into_iter().unzip();
        Ok(Self { timestamps, values })
    }
}

/// How observations are grouped into periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    /// Group ISO dates by `YYYY-MM`.
    Monthly,
    /// Consecutive blocks of the given number of observations.
    Chunk(usize),
}

/// Minimum number of observations per period.
pub const MIN_PER_PERIOD: usize = 5;

/// Functional observations sharing one basis, in time order.
#[derive(Debug, Clone)]
pub struct FunctionalSeries {
    pub labels: Vec<String>,
    pub basis: Arc<BasisSpec>,
    /// Basis coefficients (or grid values), one row per period.
    pub coeffs: DMatrix<f64>,
    pub method: String,
    pub residual_norms: Option<Vec<f64>>,
}

impl FunctionalSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn element(&self, i: usize) -> FunctionElement {
        FunctionElement::new(self.basis.clone(), self.coeffs.row(i).transpose()).expect("rows sized by basis")
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn group(panel: &RawPanel, period: Period) -> Result<Vec<(String, Vec<f64>)>> {
    match period {
        Period::Monthly => {
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for (t, v) in panel.timestamps.iter().zip(&panel.values) {
                let key = t.get(..7).filter(|k| k.as_bytes()[4] == b'-').ok_or_else(|| {
                    Error::Data(format!("timestamp {t:?} is not an ISO date"))
                })?;
                groups.entry(key.to_string()).or_default().push(*v);
            }
            Ok(groups.into_iter().collect())
        }
        Period::Chunk(n) => {
            if n == 0 {
                return Err(Error::InvalidArgument("chunk length must be positive".into()));
            }
            Ok(panel
                .values
                .chunks(n)
                .zip(panel.timestamps.chunks(n))
                .map(|(v, t)| (t[0].clone(), v.to_vec()))
                .collect())
        }
    }
}

/// Empirical quantile function of each period evaluated on `probs`.
///
/// Periods with fewer than [`MIN_PER_PERIOD`] observations are skipped with a
/// warning, or rejected when `strict` is set.
pub fn build_quantile_curves(panel: &RawPanel, period: Period, probs: &[f64], strict: bool) -> Result<FunctionalSeries> {
    if probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::InvalidArgument("probabilities must lie in (0, 1)".into()));
    }
    let basis = BasisSpec::raw_grid(probs.to_vec())?;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (label, mut vals) in group(panel, period)? {
        if vals.len() < MIN_PER_PERIOD {
            if strict {
                return Err(Error::Data(format!("period {label} has {} observations, need {MIN_PER_PERIOD}", vals.len())));
            }
            log::warn!("skipping period {label}: {} observations", vals.len());
            continue;
        }
        vals.sort_by(f64::total_cmp);
        let q: Vec<f64> = probs.iter().map(|&p| quantile_type7(&vals, p)).collect();
        if q.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data(format!("quantile curve for {label} is not monotone")));
        }
        labels.push(label);
        rows.push(q);
    }
    let g = probs.len();
    let coeffs = DMatrix::from_fn(rows.len(), g, |i, j| rows[i][j]);
    Ok(FunctionalSeries { labels, basis, coeffs, method: "quantile-type7".into(), residual_norms: None })
}

/// Weighted least-squares projection of grid values onto a Fourier basis.
pub fn smooth_to_basis(series: &FunctionalSeries, dim: usize) -> Result<FunctionalSeries> {
    let (grid, weights) = match series.basis.as_ref() {
        BasisSpec::RawGrid { grid, weights } => (grid, weights),
        BasisSpec::Fourier { .. } => return Err(Error::InvalidArgument("series is already in a Fourier basis".into())),
    };
    if grid.len() < dim {
        return Err(Error::InvalidArgument(format!("grid of {} points cannot determine {dim} coefficients", grid.len())));
    }
    let basis = BasisSpec::fourier(dim)?;
    let e = BasisSpec::fourier_design(dim, grid);
    let mut we = e.clone();
    for (mut row, w) in we.row_iter_mut().zip(weights) {
        row *= *w;
    }
    let gram = e.tr_mul(&we);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("grid does not determine the basis coefficients".into()))?;
    let n = series.len();
    let mut coeffs = DMatrix::zeros(n, dim);
    let mut resid = Vec::with_capacity(n);
    for i in 0..n {
        let f = series.coeffs.row(i).transpose();
        let c = chol.solve(&we.tr_mul(&f));
        let r = &f - &e * &c;
        resid.push(r.component_mul(&r).dot(&DVector::from_column_slice(weights)).sqrt());
        coeffs.set_row(i, &c.transpose());
    }
    Ok(FunctionalSeries {
        labels: series.labels.clone(),
        basis,
        coeffs,
        method: format!("{}+fourier-wls", series.method),
        residual_norms: Some(resid),
    })
}

/// Wide CSV: first column `t`, then `g000..` (grid values on `grid`, by
/// default equispaced over `[0, 1]`) or `c000..` (Fourier coefficients).
pub fn read_wide_csv<R: Read>(input: R, grid: Option<Vec<f64>>) -> Result<FunctionalSeries> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header[0].trim() != "t" {
        return Err(Error::Data("wide CSV must start with a `t` column".into()));
    }
    let cols: Vec<&str> = header.iter().skip(1).map(str::trim).collect();
    let kind = cols[0].chars().next().unwrap_or(' ');
    if !matches!(kind, 'g' | 'c') || cols.iter().any(|c| !c.starts_with(kind)) {
        return Err(Error::Data("value columns must all be named g000.. or c000..".into()));
    }
    let (labels, values) = read_numeric_rows(&mut rdr, cols.len())?;
    let n = labels.len();
    let coeffs = DMatrix::from_fn(n, cols.len(), |i, j| values[i][j]);
    let basis = if kind == 'c' {
        BasisSpec::fourier(cols.len())?
    } else {
        let g = grid.unwrap_or_else(|| BasisSpec::equispaced(0.0, 1.0, cols.len()));
        if g.len() != cols.len() {
            return Err(Error::DimensionMismatch { expected: cols.len(), found: g.len() });
        }
        BasisSpec::raw_grid(g)?
    };
    Ok(FunctionalSeries { labels, basis, coeffs, method: "wide-csv".into(), residual_norms: None })
}

fn read_numeric_rows<R: Read>(rdr: &mut csv::Reader<R>, width: usize) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width + 1 {
            return Err(Error::Data(format!("line {}: expected {} fields, found {}", i + 2, width + 1, rec.len())));
        }
        labels.push(rec[0].trim().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Data(format!("line {}: {s:?} is not a finite number", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    Ok((labels, values))
}

pub fn write_wide_csv<W: Write>(series: &FunctionalSeries, out: W) -> Result<()> {
    let prefix = match series.basis.as_ref() {
        BasisSpec::Fourier { .. } => 'c',
        BasisSpec::RawGrid { .. } => 'g',
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..series.coeffs.ncols()).map(|j| format!("{prefix}{j:03}")));
    w.write_record(&header)?;
    for (i, label) in series.labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(series.coeffs.row(i).iter().map(|v| fmt_sig(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Scalar CSV `(t, v1, ..., vm)`; returns labels and an `n x m` matrix.
pub fn read_scalar_csv<R: Read>(input: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header[0].trim() != "t" {
        return Err(Error::Data("scalar CSV must start with a `t` column".into()));
    }
    let width = header.len() - 1;
    let (labels, values) = read_numeric_rows(&mut rdr, width)?;
    let n = labels.len();
    Ok((labels, DMatrix::from_fn(n, width, |i, j| values[i][j])))
}

pub fn write_scalar_csv<W: Write>(labels: &[String], names: &[&str], values: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t"];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    for (i, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(values.row(i).iter().map(|v| fmt_sig(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `h, point, ci_low, ci_high, psi_hat, K, tau`.
pub fn write_irf_csv<W: Write>(rows: &[IrfInference], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "point", "ci_low", "ci_high", "psi_hat", "K", "tau"])?;
    for r in rows {
        w.write_record([
            r.horizon.to_string(),
            fmt_sig(r.point),
            fmt_sig(r.ci_low),
            fmt_sig(r.ci_high),
            fmt_sig(r.psi_hat),
            r.k.to_string(),
            fmt_sig(r.tau),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of a plot, with an optional band.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<PlotPoint>,
}

impl PlotSeries {
    pub fn from_irf(name: &str, rows: &[IrfInference]) -> Self {
        Self {
            name: name.to_string(),
            points: rows
                .iter()
                .map(|r| PlotPoint { x: r.horizon as f64, y: r.point, lo: Some(r.ci_low), hi: Some(r.ci_high) })
                .collect(),
        }
    }

    pub fn from_function(name: &str, f: &FunctionElement, points: usize) -> Self {
        Self {
            name: name.to_string(),
            points: BasisSpec::equispaced(0.0, 1.0, points)
                .into_iter()
                .map(|r| PlotPoint { x: r, y: f.eval(r), lo: None, hi: None })
                .collect(),
        }
    }
}

/// Long-format CSV `(series, x, y, lo, hi)`.
pub fn write_plot_csv<W: Write>(series: &[PlotSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "x", "y", "lo", "hi"])?;
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    for s in series {
        for p in &s.points {
            w.write_record([s.name.clone(), fmt_sig(p.x), fmt_sig(p.y), opt(p.lo), opt(p.hi)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parse a long-format plot CSV back into series, in order of appearance.
pub fn read_plot_csv<R: Read>(input: R) -> Result<Vec<PlotSeries>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<PlotSeries> = Vec::new();
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Data(format!("{s:?} is not a number"))) };
    let opt = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
    for rec in rdr.records() {
        let rec = rec?;
        let p = PlotPoint { x: num(&rec[1])?, y: num(&rec[2])?, lo: opt(&rec[3])?, hi: opt(&rec[4])? };
        match out.last_mut() {
            Some(s) if s.name == rec[0] => s.points.push(p),
            _ => out.push(PlotSeries { name: rec[0].to_string(), points: vec![p] }),
        }
    }
    Ok(out)
}

/// Minimal line chart with shaded bands.
pub fn render_svg(series: &[PlotSeries]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        for v in [Some(p.y), p.lo, p.hi].into_iter().flatten() {
            y0 = y0.min(v);
            y1 = y1.max(v);
        }
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut svg = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    svg += &format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    if y0 < 0.0 && y1 > 0.0 {
        svg += &format!("<line x1=\"{PAD}\" x2=\"{}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"#bbb\"/>\n", W - PAD, sy(0.0), sy(0.0));
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let band: Vec<&PlotPoint> = s.points.iter().filter(|p| p.lo.is_some() && p.hi.is_some()).collect();
        if !band.is_empty() {
            let upper = band.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.hi.unwrap())));
            let lower = band.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.lo.unwrap())));
            let poly: Vec<String> = upper.chain(lower).collect();
            svg += &format!("<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", poly.join(" "));
        }
        let line: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
        svg += &format!("<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n", line.join(" "));
        svg += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            PAD + 6.0,
            PAD + 16.0 * (i as f64 + 1.0),
            escape(&s.name)
        );
    }
    svg += &format!("<text x=\"{PAD}\" y=\"{}\" font-size=\"11\">{}</text>\n", H - 12.0, fmt_sig(x0));
    svg += &format!("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n", W - PAD, H - 12.0, fmt_sig(x1));
    svg += &format!("<text x=\"4\" y=\"{}\" font-size=\"11\">{}</text>\n", H - PAD, fmt_sig(y0));
    svg += &format!("<text x=\"4\" y=\"{}\" font-size=\"11\">{}</text>\n", PAD, fmt_sig(y1));
    svg += "</svg>\n";
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write the plot CSV to `path`, plus an SVG chart when `svg` is given.
pub fn emit_plot_data(series: &[PlotSeries], path: &Path, svg: Option<&Path>) -> Result<()> {
    write_plot_csv(series, std::fs::File::create(path)?)?;
    if let Some(svg) = svg {
        std::fs::write(svg, render_svg(series))?;
    }
    Ok(())
}

/// Direction function given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Const(f64),
    /// `r -> a + b r`.
    Slope(f64, f64),
    /// Two-column CSV `(r, value)` of grid values.
    File(std::path::PathBuf),
}

impl std::str::FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse function spec {s:?}; use const:<c>, slope:<a,b> or file:<path>"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
        match kind {
            "const" => Ok(FunctionSpec::Const(num(rest)?)),
            "slope" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Ok(FunctionSpec::Slope(num(a)?, num(b)?))
            }
            "file" if !rest.is_empty() => Ok(FunctionSpec::File(rest.into())),
            _ => Err(bad()),
        }
    }
}

impl FunctionSpec {
    pub fn to_element(&self, basis: &Arc<BasisSpec>) -> Result<FunctionElement> {
        match self {
            FunctionSpec::Const(c) => Ok(FunctionElement::constant(basis.clone(), *c)),
            FunctionSpec::Slope(a, b) => Ok(FunctionElement::affine(basis.clone(), *a, *b)),
            FunctionSpec::File(path) => {
                let mut rdr = csv::Reader::from_path(path)?;
                let mut grid = Vec::new();
                let mut vals = Vec::new();
                for rec in rdr.records() {
                    let rec = rec?;
                    let parse = |i: usize| -> Result<f64> {
                        rec.get(i)
                            .and_then(|v| v.trim().parse().ok())
                            .ok_or_else(|| Error::Data(format!("{}: expected numeric (r, value) rows", path.display())))
                    };
                    grid.push(parse(0)?);
                    vals.push(parse(1)?);
                }
                let raw = BasisSpec::raw_grid(grid)?;
                match basis.as_ref() {
                    BasisSpec::RawGrid { .. } => {
                        if raw != *basis {
                            return Err(Error::BasisMismatch);
                        }
                        FunctionElement::new(basis.clone(), DVector::from_vec(vals))
                    }
                    BasisSpec::Fourier { dim } => {
                        let series = FunctionalSeries {
                            labels: vec!["zeta".into()],
                            basis: raw,
                            coeffs: DMatrix::from_row_slice(1, vals.len(), &vals),
                            method: "file".into(),
                            residual_norms: None,
                        };
                        Ok(smooth_to_basis(&series, *dim)?.element(0))
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_specs_parse() {
        assert_eq!("const:1".parse::<FunctionSpec>().unwrap(), FunctionSpec::Const(1.0));
        assert_eq!("slope:-2,2".parse::<FunctionSpec>().unwrap(), FunctionSpec::Slope(-2.0, 2.0));
        assert!("slope:1".parse::<FunctionSpec>().is_err());
        assert!("wiggle:1".parse::<FunctionSpec>().is_err());
        let basis = BasisSpec::raw_grid(BasisSpec::equispaced(0.0, 1.0, 5)).unwrap();
        let z = FunctionSpec::Slope(-2.0, 2.0).to_element(&basis).unwrap();
        assert_eq!(z.coeffs().as_slice(), &[-2.0, -1.5, -1.0, -0.5, 0.0]);
    }

    #[test]
    fn type7_matches_hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&x, 0.5), 2.5);
        assert_eq!(quantile_type7(&x, 0.25), 1.75);
        assert_eq!(quantile_type7(&x, 0.0), 1.0);
        assert_eq!(quantile_type7(&x, 1.0), 4.0);
    }

    #[test]
    fn fmt_sig_rounds_to_twelve_digits() {
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(-2.0), "-2");
        assert_eq!(fmt_sig(123456.7890123456), "123456.789012");
    }

    #[test]
    fn two_point_sample_steps_at_half() {
        let panel = RawPanel {
            timestamps: (0..6).map(|i| format!("2020-01-{:02}", i + 1)).collect(),
            values: vec![-1.0, 1.0, -1.0, 1.0, -1.0, 1.0],
        };
        let s = build_quantile_curves(&panel, Period::Monthly, &[0.1, 0.3, 0.7, 0.9], true).unwrap();
        assert_eq!(s.coeffs.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn monthly_grouping_and_sparse_periods() {
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for d in 1..=10 {
            ts.push(format!("2021-03-{d:02}"));
            vs.push(d as f64);
        }
        ts.push("2021-04-01".into());
        vs.push(0.0);
        let panel = RawPanel { timestamps: ts, values: vs };
        let s = build_quantile_curves(&panel, Period::Monthly, &default_probs(), false).unwrap();
        assert_eq!(s.labels, vec!["2021-03"]);
        assert!(build_quantile_curves(&panel, Period::Monthly, &default_probs(), true).is_err());
    }

    #[test]
    fn smoothing_with_one_function_is_weighted_mean() {
        let grid = BasisSpec::equispaced(0.0, 1.0, 11);
        let basis = BasisSpec::raw_grid(grid.clone()).unwrap();
        let vals: Vec<f64> = grid.iter().map(|r| r * r).collect();
        let series = FunctionalSeries {
            labels: vec!["a".into()],
            basis: basis.clone(),
            coeffs: DMatrix::from_row_slice(1, 11, &vals),
            method: "test".into(),
            residual_norms: None,
        };
        let out = smooth_to_basis(&series, 1).unwrap();
        let BasisSpec::RawGrid { weights, .. } = basis.as_ref() else { unreachable!() };
        let mean = vals.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / weights.iter().sum::<f64>();
        assert!((out.coeffs[(0, 0)] - mean).abs() < 1e-14);
    }

    #[test]
    fn grid_smaller_than_basis_is_rejected() {
        let basis = BasisSpec::raw_grid(vec![0.1, 0.5, 0.9]).unwrap();
        let series = FunctionalSeries {
            labels: vec!["a".into()],
            basis,
            coeffs: DMatrix::zeros(1, 3),
            method: "test".into(),
            residual_norms: None,
        };
        assert!(smooth_to_basis(&series, 5).is_err());
    }
}
