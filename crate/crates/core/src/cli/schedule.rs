use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arch::{flop_count, layout, param_count, ArchitectureSpec, ChannelSchedule, UnitKind, UnitPart};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRow {
    pub layer: usize,
    pub part: String,
    pub kind: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub params: u64,
    pub macs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub schedule: ChannelSchedule,
    pub params: u64,
    pub flops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub spec: String,
    pub units: Vec<UnitRow>,
    #[serde(flatten)]
    pub summary: ScheduleSummary,
    pub reference: Option<ScheduleSummary>,
    /// `params / reference.params`.
    pub param_ratio: Option<f64>,
}

fn summarize(spec: &ArchitectureSpec, schedule: &ChannelSchedule) -> Result<ScheduleSummary> {
    Ok(ScheduleSummary {
        schedule: schedule.clone(),
        params: param_count(spec, schedule)?,
        flops: flop_count(spec, schedule)?,
    })
}

pub fn schedule_report(
    spec: &ArchitectureSpec,
    schedule: &ChannelSchedule,
    reference: Option<&ChannelSchedule>,
) -> Result<ScheduleReport> {
    spec.check_schedule(schedule)?;
    let lay = layout(spec, schedule)?;
    let units = lay
        .units
        .iter()
        .map(|u| UnitRow {
            layer: u.id.layer,
            part: match u.id.part {
                UnitPart::Main => "main".into(),
                UnitPart::Body(i) => format!("body{i}"),
                UnitPart::Shortcut => "shortcut".into(),
            },
            kind: match u.kind {
                UnitKind::Conv { kernel, stride, .. } => format!("conv{kernel}x{kernel}/{stride}"),
                UnitKind::Dense { .. } => "dense".into(),
            },
            in_channels: u.in_channels,
            out_channels: u.out_channels,
            params: u.param_count(),
            macs: u.macs(),
        })
        .collect();
    let summary = summarize(spec, schedule)?;
    let reference = reference.map(|r| summarize(spec, r)).transpose()?;
    let param_ratio = reference.as_ref().map(|r| summary.params as f64 / r.params as f64);
    Ok(ScheduleReport {
        spec: spec.name.clone(),
        units,
        summary,
        reference,
        param_ratio,
    })
}

fn millions(n: u64) -> String {
    format!("{:.3}M", n as f64 / 1e6)
}

pub fn print_table(report: &ScheduleReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{}", report.spec)?;
    writeln!(out, "{:>5}  {:<9} {:<12} {:>6} {:>6} {:>12} {:>14}", "layer", "part", "kind", "in", "out", "params", "MACs")?;
    for u in &report.units {
        writeln!(
            out,
            "{:>5}  {:<9} {:<12} {:>6} {:>6} {:>12} {:>14}",
            u.layer, u.part, u.kind, u.in_channels, u.out_channels, u.params, u.macs
        )?;
    }
    writeln!(out, "params {} ({}), MACs {}", report.summary.params, millions(report.summary.params), report.summary.flops)?;
    if let (Some(r), Some(ratio)) = (&report.reference, report.param_ratio) {
        writeln!(out, "reference params {} ({}), MACs {}, ratio {:.4}", r.params, millions(r.params), r.flops, ratio)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::fixtures;

    #[test]
    fn modified_resnet18_is_about_ten_million() {
        let spec = fixtures::resnet18();
        let [_, s2, _] = fixtures::published::resnet18_modified();
        let rep = schedule_report(&spec, &s2, Some(&fixtures::published::resnet18_original())).unwrap();
        assert!((rep.summary.params as f64 / 9.94e6 - 1.0).abs() < 0.03);
        assert!(rep.param_ratio.unwrap() < 1.0);
        let mut buf = Vec::new();
        print_table(&rep, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("ratio"));
    }

    #[test]
    fn uniform_table() {
        let spec = fixtures::plain_cnn();
        let rep = schedule_report(&spec, &spec.uniform_schedule(32), None).unwrap();
        assert!(rep.units.iter().filter(|u| u.kind.starts_with("conv")).all(|u| u.out_channels == 32));
        assert_eq!(rep.summary.params, param_count(&spec, &spec.uniform_schedule(32)).unwrap());
    }
}
