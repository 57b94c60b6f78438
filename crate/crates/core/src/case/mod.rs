//! Case files, the run driver and its reports.
//!
//! A case is a TOML document with nested sections whose physical values are
//! strings carrying a unit (`"0.5 m"`, `"60 rpm"`, `"50 degC"`). Parsing
//! rejects unknown keys; [`CaseFile::resolve`] converts to SI and reports
//! every problem at once with its key path.

mod config;
mod reports;
mod run;
pub mod units;

pub use config::{
    Benchmark, BenchmarkSection, BoundaryDef, BoundarySection, Case, CaseFile, IbSection, InitialSection,
    MaterialSection, MeshDef, MeshSection, MeshSource, MotionSection, OutputDef, OutputSection, Probe, ProbeSection,
    RheologySection, SectionAverageSection, SectionDef, SectionField, Shape, SolverSection, SourcesSection,
    SurfaceDef, SurfaceReportDef, SurfaceReportSection, SurfaceSection, SECTION_FIELDS,
};
pub use reports::{
    active_cells, benchmark_report, couette_speed, exchange_check, field_values, locate_cell,
    power_law_channel_speed, section_average, section_integral, surface_curve, surface_report, total_variation,
    BenchmarkReport, ExchangeCheck, SurfaceSample, BENCHMARK_CSV_HEADER, SURFACE_CSV_HEADER,
};
pub use run::{
    load_case, run_case, Overrides, RunSummary, EXCHANGE_CSV_HEADER, PROBES_CSV_HEADER, SECTIONS_CSV_HEADER,
    SNAPSHOTS_CSV_HEADER, STEPS_CSV_HEADER,
};

#[cfg(test)]
mod tests;
