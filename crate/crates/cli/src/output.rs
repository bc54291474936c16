//! CSV artifact writers. Floats go through `Display` (shortest round-trip
//! form), so identical runs produce byte-identical files.

use modelrobust::diagnostics::{DiagnosticTrace, MisspecTest};
use modelrobust::simulation::CltReport;
use modelrobust::{bootstrap::PluginLimitTable, Dataset, Result, VarianceReport};
use modelrobust::nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::path::Path;

fn write_file(path: &Path, content: String) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

pub fn write_estimate(
    path: &Path,
    components: &[String],
    theta: &DVector<f64>,
    se_sandwich: &DVector<f64>,
    se_boot: Option<&DVector<f64>>,
) -> Result<()> {
    let mut out = String::new();
    match se_boot {
        None => out.push_str("component,estimate,se_sandwich\n"),
        Some(_) => out.push_str("component,estimate,se_sandwich,se_boot\n"),
    }
    for j in 0..theta.len() {
        let name = components.get(j).cloned().unwrap_or_else(|| format!("theta{j}"));
        match se_boot {
            None => {
                let _ = writeln!(out, "{name},{},{}", theta[j], se_sandwich[j]);
            }
            Some(sb) => {
                let _ = writeln!(out, "{name},{},{},{}", theta[j], se_sandwich[j], sb[j]);
            }
        }
    }
    write_file(path, out)
}

fn push_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let _ = writeln!(out, "{name},{i},{j},{}", m[(i, j)]);
        }
    }
}

pub fn write_variance(path: &Path, report: &VarianceReport) -> Result<()> {
    let mut out = String::from("matrix,row,col,value\n");
    push_matrix(&mut out, "bread", &report.bread);
    push_matrix(&mut out, "meat_total", &report.meat_total);
    push_matrix(&mut out, "av_total", &report.av_total);
    write_file(path, out)
}

/// Trace rows per the export schema, with `center=unweighted` sentinel rows
/// carrying the unweighted fit so the SVG is a pure function of this file.
pub fn write_trace(path: &Path, trace: &DiagnosticTrace, components: &[String]) -> Result<()> {
    let mut out = String::from("center,component,estimate,boot_se,band_lo,band_hi\n");
    let q = trace.theta_unweighted.len();
    for (k, center) in trace.centers.iter().enumerate() {
        for j in 0..q {
            let name = components.get(j).cloned().unwrap_or_else(|| format!("theta{j}"));
            let _ = writeln!(
                out,
                "{center},{name},{},{},{},{}",
                trace.theta_at_center[(k, j)],
                trace.boot_se[(k, j)],
                trace.band_lo[(k, j)],
                trace.band_hi[(k, j)]
            );
        }
    }
    for j in 0..q {
        let name = components.get(j).cloned().unwrap_or_else(|| format!("theta{j}"));
        let se = trace.unweighted_boot_se[j];
        let est = trace.theta_unweighted[j];
        let _ = writeln!(
            out,
            "unweighted,{name},{est},{se},{},{}",
            est - 2.0 * se,
            est + 2.0 * se
        );
    }
    write_file(path, out)
}

pub fn write_trace_replicates(
    path: &Path,
    trace: &DiagnosticTrace,
    components: &[String],
) -> Result<()> {
    let mut out = String::from("replicate,center,component,estimate\n");
    let q = trace.theta_unweighted.len();
    if let Some(traces) = &trace.replicate_traces {
        for (b, rep) in traces.iter().enumerate() {
            for (k, center) in trace.centers.iter().enumerate() {
                for j in 0..q {
                    let name =
                        components.get(j).cloned().unwrap_or_else(|| format!("theta{j}"));
                    let _ = writeln!(out, "{b},{center},{name},{}", rep[(k, j)]);
                }
            }
        }
    }
    if let Some(plain) = &trace.unweighted_replicates {
        for b in 0..plain.nrows() {
            for j in 0..q {
                let name = components.get(j).cloned().unwrap_or_else(|| format!("theta{j}"));
                let _ = writeln!(out, "{b},unweighted,{name},{}", plain[(b, j)]);
            }
        }
    }
    write_file(path, out)
}

pub fn write_misspec(path: &Path, test: &MisspecTest, components: &[String]) -> Result<()> {
    let mut out = String::from("component,delta,se,z\n");
    for j in 0..test.delta.len() {
        let name = components.get(j).cloned().unwrap_or_else(|| format!("theta{j}"));
        let _ = writeln!(out, "{name},{},{},{}", test.delta[j], test.se[j], test.z[j]);
    }
    write_file(path, out)
}

pub fn write_sample(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{},y", data.column_names().join(","));
    for i in 0..data.n() {
        for j in 0..data.p() {
            let _ = write!(out, "{},", data.regressors()[(i, j)]);
        }
        let _ = writeln!(out, "{}", data.response()[i]);
    }
    write_file(path, out)
}

pub fn write_clt_report(path: &Path, report: &CltReport) -> Result<()> {
    let mut out = String::from("record,row,col,value\n");
    let _ = writeln!(out, "n,0,0,{}", report.n);
    let _ = writeln!(out, "r,0,0,{}", report.r);
    let _ = writeln!(out, "failures,0,0,{}", report.failures);
    for (j, v) in report.theta_p.iter().enumerate() {
        let _ = writeln!(out, "theta_p,{j},0,{v}");
    }
    push_matrix(&mut out, "emp_var_total", &report.emp_var_total);
    push_matrix(&mut out, "emp_var_noise", &report.emp_var_noise);
    push_matrix(&mut out, "emp_var_approx", &report.emp_var_approx);
    push_matrix(&mut out, "theo_total", &report.theo_total);
    push_matrix(&mut out, "theo_noise", &report.theo_noise);
    push_matrix(&mut out, "theo_approx", &report.theo_approx);
    let _ = writeln!(out, "rel_err_total,0,0,{}", report.rel_err[0]);
    let _ = writeln!(out, "rel_err_noise,0,0,{}", report.rel_err[1]);
    let _ = writeln!(out, "rel_err_approx,0,0,{}", report.rel_err[2]);
    push_matrix(&mut out, "cross_corr", &report.cross_corr);
    write_file(path, out)
}

pub fn write_plugin_limit(path: &Path, table: &PluginLimitTable) -> Result<()> {
    let mut out = String::from("m,bv_frobenius,av_frobenius,rel_gap,failures\n");
    let fro = |m: &DMatrix<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let av_fro = fro(&table.av_plugin);
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{av_fro},{},{}",
            row.resample_size,
            fro(&row.bv),
            row.rel_gap,
            row.failures
        );
    }
    write_file(path, out)
}
