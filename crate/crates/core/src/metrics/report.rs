use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saliency::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Prototype,
    TestPatch,
}

impl Role {
    pub fn name(&self) -> &'static str {
        match self {
            Role::Prototype => "prototype",
            Role::TestPatch => "test-patch",
        }
    }
}

/// Everything measured for one (image, prototype, location, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub image_id: u64,
    pub prototype_id: usize,
    pub method: Method,
    pub role: Role,
    pub audc: f64,
    pub erf_area: Option<f64>,
    pub overlap_fraction: Option<f64>,
    pub irrelevant: Option<bool>,
    /// Similarity ratios over the extended deletion range.
    #[serde(skip)]
    pub ratios: Vec<f64>,
}

/// One per-sample CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub image_id: u64,
    pub prototype_id: usize,
    pub method: Method,
    pub role: Role,
    pub audc: f64,
    pub erf_area: Option<f64>,
    pub overlap_fraction: Option<f64>,
    pub irrelevant: Option<bool>,
}

impl From<&SampleResult> for SampleRow {
    fn from(r: &SampleResult) -> Self {
        SampleRow {
            image_id: r.image_id,
            prototype_id: r.prototype_id,
            method: r.method,
            role: r.role,
            audc: r.audc,
            erf_area: r.erf_area,
            overlap_fraction: r.overlap_fraction,
            irrelevant: r.irrelevant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Stat {
    if values.is_empty() {
        return Stat::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Stat {
        n: values.len(),
        mean,
        std: var.sqrt(),
    }
}

/// One summary line: AUDC per role (Table-1 style) and irrelevant share per
/// role (Table-2 style).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model_kind: String,
    pub method: Method,
    pub n_prototypes: usize,
    pub audc_prototypes_mean: f64,
    pub audc_prototypes_std: f64,
    pub n_test: usize,
    pub audc_test_mean: f64,
    pub audc_test_std: f64,
    pub irrelevant_prototypes_pct: Option<f64>,
    pub irrelevant_test_pct: Option<f64>,
}

fn irrelevant_pct(rows: &[&SampleResult]) -> Option<f64> {
    let judged: Vec<bool> = rows.iter().filter_map(|r| r.irrelevant).collect();
    if judged.is_empty() {
        None
    } else {
        Some(100.0 * judged.iter().filter(|&&b| b).count() as f64 / judged.len() as f64)
    }
}

/// Deterministic fold of per-sample results into one row per method.
pub fn aggregate_report(model_kind: &str, results: &[SampleResult]) -> Vec<SummaryRow> {
    let mut by_method: BTreeMap<Method, Vec<&SampleResult>> = BTreeMap::new();
    for r in results {
        by_method.entry(r.method).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, rows)| {
            let split = |role: Role| -> Vec<&SampleResult> {
                rows.iter().copied().filter(|r| r.role == role).collect()
            };
            let protos = split(Role::Prototype);
            let tests = split(Role::TestPatch);
            let p = mean_std(&protos.iter().map(|r| r.audc).collect::<Vec<_>>());
            let t = mean_std(&tests.iter().map(|r| r.audc).collect::<Vec<_>>());
            SummaryRow {
                model_kind: model_kind.to_string(),
                method,
                n_prototypes: p.n,
                audc_prototypes_mean: p.mean,
                audc_prototypes_std: p.std,
                n_test: t.n,
                audc_test_mean: t.mean,
                audc_test_std: t.std,
                irrelevant_prototypes_pct: irrelevant_pct(&protos),
                irrelevant_test_pct: irrelevant_pct(&tests),
            }
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::input(path, e.to_string())
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_err(path, e))
}

pub fn write_samples_csv(path: &Path, results: &[SampleResult]) -> Result<()> {
    let rows: Vec<SampleRow> = results.iter().map(SampleRow::from).collect();
    write_rows(path, &rows)
}

/// Long-format τ samples: one row per (sample, area).
pub fn write_tau_csv(path: &Path, results: &[SampleResult], areas: &[f64]) -> Result<()> {
    #[derive(Serialize)]
    struct TauRow {
        image_id: u64,
        prototype_id: usize,
        method: Method,
        role: Role,
        area: f64,
        tau: f64,
    }
    let mut rows = Vec::new();
    for r in results {
        for (&area, &tau) in areas.iter().zip(&r.ratios) {
            rows.push(TauRow {
                image_id: r.image_id,
                prototype_id: r.prototype_id,
                method: r.method,
                role: r.role,
                area,
                tau,
            });
        }
    }
    write_rows(path, &rows)
}

/// Mean τ at every area, per method.
pub fn mean_curves(results: &[SampleResult]) -> BTreeMap<Method, Vec<f64>> {
    let mut acc: BTreeMap<Method, (Vec<f64>, usize)> = BTreeMap::new();
    for r in results {
        let e = acc.entry(r.method).or_insert_with(|| (vec![0.0; r.ratios.len()], 0));
        for (a, v) in e.0.iter_mut().zip(&r.ratios) {
            *a += v;
        }
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(m, (sum, n))| (m, sum.into_iter().map(|s| s / n as f64).collect()))
        .collect()
}

/// Mean-τ-versus-deletion-area chart, one polyline per method.
pub fn curves_svg(curves: &BTreeMap<Method, Vec<f64>>, areas: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 5] = ["#1f77b4", "#17becf", "#d62728", "#e6b800", "#7f7f7f"];
    let a_max = areas.last().copied().unwrap_or(1.0).max(1e-12);
    let y_max = curves
        .values()
        .flatten()
        .copied()
        .fold(1.0f64, f64::max);
    let px = |a: f64| PAD + a / a_max * (W - 2.0 * PAD);
    let py = |t: f64| H - PAD - t.max(0.0) / y_max * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" points="{},{} {},{} {},{}"/>"#,
        PAD, PAD, PAD, H - PAD, W - PAD, H - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">deletion area (%)</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">mean similarity ratio</text>"#, H / 2.0, H / 2.0);
    for k in 0..=4 {
        let a = a_max * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" font-size="10" text-anchor="middle">{:.1}</text>"#, px(a), H - PAD + 14.0, 100.0 * a);
        let t = y_max * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" font-size="10" text-anchor="end">{:.2}</text>"#, PAD - 4.0, py(t) + 3.0, t);
    }
    for (i, (method, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = areas
            .iter()
            .zip(curve)
            .map(|(&a, &t)| format!("{:.2},{:.2}", px(a), py(t)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-method="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            method,
            color,
            pts.join(" ")
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" fill="{}">{}</text>"#, W - PAD - 120.0, PAD + 14.0 * (i as f64 + 1.0), color, method);
    }
    s.push_str("</svg>\n");
    s
}
