//! Baseline CPU timing models and the comparison report.
//!
//! The Intel 80386/80486 side is a static trace cost model: each instruction
//! class has a fixed clock cost, a loop costs its setup plus its body once
//! per iteration (conditional jump taken on all but the last pass), and no
//! pipeline, cache, or prefetch effects are modeled. The report combines
//! those totals with emulated M1 cycle counts into an 18-row comparison
//! table rendered as CSV, markdown, or JSON.
//!
//! All derived metrics (speedup, wall time, elements/cycle, cycles/element)
//! are computed in exact rational arithmetic and only rounded at the
//! presentation edge. Where the published comparison table's own cells
//! disagree with arithmetic on its cycle counts, the report prints the
//! arithmetic truth and carries a footnote in the `notes` column.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerfError {
    #[error("timing table has no cost for instruction class {0:?}")]
    UnknownInstructionClass(InstrClass),
    #[error("loop models require at least one iteration")]
    InvalidIterations,
    #[error("cycles, element count, and frequency must be positive")]
    DivisionByZero,
    #[error("missing measured cycles for '{0}': run the kernels first")]
    MissingInput(String),
}

// ---------------------------------------------------------------------------
// Instruction-timing model
// ---------------------------------------------------------------------------

/// Baseline CPUs with instruction-level timing models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cpu {
    I80486,
    I80386,
}

impl Cpu {
    pub fn name(self) -> &'static str {
        match self {
            Cpu::I80486 => "80486",
            Cpu::I80386 => "80386",
        }
    }
}

/// Instruction classes appearing in the baseline loop kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InstrClass {
    /// MOV reg, imm
    MovRegImm,
    /// MOV reg, [mem]
    MovRegMem,
    /// MOV [mem], reg
    MovMemReg,
    /// ADD reg, [mem] / ADD [mem], reg forms used by the loops
    Add,
    /// INC reg
    Inc,
    /// DEC reg
    Dec,
    /// JNZ label — carries a (taken, not-taken) cost pair
    Jnz,
}

const PLAIN_CLASSES: [InstrClass; 6] = [
    InstrClass::MovRegImm,
    InstrClass::MovRegMem,
    InstrClass::MovMemReg,
    InstrClass::Add,
    InstrClass::Inc,
    InstrClass::Dec,
];

/// Per-class clock costs for one CPU. `Jnz` costs are a (taken, not-taken)
/// pair; every other class has a single cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingTable {
    pub cpu: Cpu,
    costs: BTreeMap<InstrClass, u64>,
    jnz: Option<(u64, u64)>,
}

impl TimingTable {
    /// A table with no entries; populate it with [`TimingTable::set_cost`]
    /// and [`TimingTable::set_jnz`].
    pub fn empty(cpu: Cpu) -> Self {
        TimingTable {
            cpu,
            costs: BTreeMap::new(),
            jnz: None,
        }
    }

    pub fn set_cost(&mut self, class: InstrClass, cycles: u64) {
        self.costs.insert(class, cycles);
    }

    pub fn set_jnz(&mut self, taken: u64, not_taken: u64) {
        self.jnz = Some((taken, not_taken));
    }

    /// The documented costs for the two modeled Intel CPUs:
    /// 80486 — mov r,imm 1; mov r,[m] 1; mov [m],r 1; add 1; inc 1; dec 1;
    /// jnz 3 taken / 1 not taken. 80386 — 2; 4; 2; 2; 2; 2; jnz 7/3.
    pub fn intel(cpu: Cpu) -> Self {
        let mut t = TimingTable::empty(cpu);
        let (plain, jnz) = match cpu {
            Cpu::I80486 => ([1u64, 1, 1, 1, 1, 1], (3u64, 1u64)),
            Cpu::I80386 => ([2, 4, 2, 2, 2, 2], (7, 3)),
        };
        for (class, cycles) in PLAIN_CLASSES.into_iter().zip(plain) {
            t.set_cost(class, cycles);
        }
        t.set_jnz(jnz.0, jnz.1);
        t
    }

    /// Cost of one instruction; `taken` only matters for `Jnz`.
    pub fn cost(&self, class: InstrClass, taken: bool) -> Result<u64, PerfError> {
        match class {
            InstrClass::Jnz => {
                let (t, n) = self
                    .jnz
                    .ok_or(PerfError::UnknownInstructionClass(InstrClass::Jnz))?;
                Ok(if taken { t } else { n })
            }
            other => self
                .costs
                .get(&other)
                .copied()
                .ok_or(PerfError::UnknownInstructionClass(other)),
        }
    }
}

/// A counted loop as a flat instruction-class trace: straight-line setup,
/// then `iterations` passes over the body with the closing conditional jump
/// taken on every pass but the last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopModel {
    pub setup: Vec<InstrClass>,
    pub body: Vec<InstrClass>,
    pub iterations: u32,
}

impl LoopModel {
    pub fn new(
        setup: Vec<InstrClass>,
        body: Vec<InstrClass>,
        iterations: u32,
    ) -> Result<Self, PerfError> {
        if iterations == 0 {
            return Err(PerfError::InvalidIterations);
        }
        Ok(LoopModel {
            setup,
            body,
            iterations,
        })
    }
}

/// The elementwise vector-add loop: four pointer/counter loads up front,
/// then per element two operand loads, the add, the store, three pointer
/// increments (two-byte elements, so the third inc covers the second byte
/// of the destination step being folded into the addressing pattern used
/// by the listing), the counter decrement, and the closing jump.
pub fn translation_loop(n: u32) -> Result<LoopModel, PerfError> {
    use InstrClass::*;
    LoopModel::new(
        vec![MovRegImm, MovRegImm, MovRegImm, MovRegImm],
        vec![
            MovRegMem, MovRegMem, Add, MovMemReg, Inc, Inc, Inc, Dec, Jnz,
        ],
        n,
    )
}

/// The vector-times-constant loop: four setup loads, then per element one
/// operand load, the add-based multiply step, the store, two pointer
/// increments, the counter decrement, and the closing jump.
pub fn scaling_loop(n: u32) -> Result<LoopModel, PerfError> {
    use InstrClass::*;
    LoopModel::new(
        vec![MovRegImm, MovRegImm, MovRegImm, MovRegImm],
        vec![MovRegMem, Add, MovMemReg, Inc, Inc, Dec, Jnz],
        n,
    )
}

/// Total clocks for a loop model under a timing table: setup, plus
/// `iterations - 1` taken passes, plus one final not-taken pass.
pub fn intel_cycles(model: &LoopModel, table: &TimingTable) -> Result<u64, PerfError> {
    if model.iterations == 0 {
        return Err(PerfError::InvalidIterations);
    }
    let sum = |classes: &[InstrClass], taken: bool| -> Result<u64, PerfError> {
        classes
            .iter()
            .try_fold(0u64, |acc, &c| Ok(acc + table.cost(c, taken)?))
    };
    let setup = sum(&model.setup, false)?;
    let body_taken = sum(&model.body, true)?;
    let body_last = sum(&model.body, false)?;
    Ok(setup + u64::from(model.iterations - 1) * body_taken + body_last)
}

// ---------------------------------------------------------------------------
// Derived metrics
// ---------------------------------------------------------------------------

/// Wall time and throughput for a cycle count, in exact rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    pub time_us: Rational64,
    pub epc: Rational64,
    pub cpe: Rational64,
}

/// time = cycles/frequency, elements/cycle = n/cycles, cycles/element =
/// cycles/n. All three inputs must be positive.
pub fn metrics(cycles: u64, n_elements: u32, frequency_mhz: u32) -> Result<Metrics, PerfError> {
    if cycles == 0 || n_elements == 0 || frequency_mhz == 0 {
        return Err(PerfError::DivisionByZero);
    }
    let cycles = i64::try_from(cycles).map_err(|_| PerfError::DivisionByZero)?;
    let n = i64::from(n_elements);
    let f = i64::from(frequency_mhz);
    Ok(Metrics {
        time_us: Rational64::new(cycles, f),
        epc: Rational64::new(n, cycles),
        cpe: Rational64::new(cycles, n),
    })
}

/// Cycle-count ratio of a baseline system to M1 for the same algorithm.
/// Exact, so `speedup(a, b) * speedup(b, a) == 1`.
pub fn speedup(other_cycles: u64, m1_cycles: u64) -> Result<Rational64, PerfError> {
    if other_cycles == 0 || m1_cycles == 0 {
        return Err(PerfError::DivisionByZero);
    }
    let a = i64::try_from(other_cycles).map_err(|_| PerfError::DivisionByZero)?;
    let b = i64::try_from(m1_cycles).map_err(|_| PerfError::DivisionByZero)?;
    Ok(Rational64::new(a, b))
}

// ---------------------------------------------------------------------------
// Decimal presentation (exact, integer-only rounding)
// ---------------------------------------------------------------------------

/// Format to `sig` significant digits, round half up, trailing zeros
/// trimmed. Integer arithmetic throughout so output is byte-stable.
pub fn fmt_sig(r: Rational64, sig: u32) -> String {
    assert!(sig >= 1);
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r < Rational64::zero();
    let r = r.abs();
    let (mut num, mut den) = (*r.numer() as i128, *r.denom() as i128);
    // Normalize num/den into [1, 10) tracking the decimal exponent.
    let mut exp: i32 = 0;
    while num >= 10 * den {
        den *= 10;
        exp += 1;
    }
    while num < den {
        num *= 10;
        exp -= 1;
    }
    let mut digits = (num * 10i128.pow(sig - 1) + den / 2) / den;
    if digits >= 10i128.pow(sig) {
        digits /= 10;
        exp += 1;
    }
    let ds = digits.to_string();
    let point = exp + 1; // digits before the decimal point
    let mut s = String::new();
    if neg {
        s.push('-');
    }
    if point <= 0 {
        s.push_str("0.");
        for _ in 0..-point {
            s.push('0');
        }
        s.push_str(&ds);
    } else if point as usize >= ds.len() {
        s.push_str(&ds);
        for _ in 0..(point as usize - ds.len()) {
            s.push('0');
        }
    } else {
        s.push_str(&ds[..point as usize]);
        s.push('.');
        s.push_str(&ds[point as usize..]);
    }
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Format with exactly `dp` decimal places, round half up.
pub fn fmt_fixed(r: Rational64, dp: u32) -> String {
    let neg = r < Rational64::zero();
    let r = r.abs();
    let scale = 10i128.pow(dp);
    let (num, den) = (*r.numer() as i128, *r.denom() as i128);
    let v = (num * scale + den / 2) / den;
    let sign = if neg && v != 0 { "-" } else { "" };
    if dp == 0 {
        format!("{sign}{v}")
    } else {
        format!(
            "{sign}{}.{:0width$}",
            v / scale,
            v % scale,
            width = dp as usize
        )
    }
}

// ---------------------------------------------------------------------------
// The comparison report
// ---------------------------------------------------------------------------

/// Whether the report reproduces the published table's cycle counts or
/// substitutes this workspace's own measured and re-derived ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    PaperPublished,
    Recomputed,
}

impl ReportMode {
    pub fn token(self) -> &'static str {
        match self {
            ReportMode::PaperPublished => "paper",
            ReportMode::Recomputed => "recomputed",
        }
    }
}

/// Systems appearing in the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    M1,
    I80486,
    I80386,
    Pentium,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::M1 => "M1",
            System::I80486 => "80486",
            System::I80386 => "80386",
            System::Pentium => "Pentium",
        }
    }

    /// Clock rates used for wall-time cells: M1 100 MHz, 80486 100 MHz,
    /// 80386 40 MHz, Pentium 133 MHz.
    pub fn frequency_mhz(self) -> u32 {
        match self {
            System::M1 => 100,
            System::I80486 => 100,
            System::I80386 => 40,
            System::Pentium => 133,
        }
    }
}

/// One comparison row. `speedup` is `None` on M1 rows (self-comparison is
/// omitted, rendered as an em dash).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub algorithm: &'static str,
    pub system: System,
    pub n_elements: u32,
    pub cycles: u64,
    pub speedup: Option<Rational64>,
    pub time_us: Rational64,
    pub elements_per_cycle: Rational64,
    pub cycles_per_element: Rational64,
    pub notes: String,
}

/// The full comparison table plus the mode that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleReport {
    pub mode: ReportMode,
    pub rows: Vec<ReportRow>,
}

/// Measured kernel cycle counts, persisted as JSON keyed by kernel
/// configuration so recomputed reports are reproducible offline.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchResults {
    pub cycles: BTreeMap<String, u64>,
}

/// The kernel configurations a recomputed report needs.
pub const BENCH_KEYS: [&str; 6] = [
    "translate_64",
    "translate_8",
    "scale_64",
    "scale_8",
    "matmul_8",
    "matmul_4",
];

impl BenchResults {
    pub fn set(&mut self, key: &str, cycles: u64) {
        self.cycles.insert(key.to_string(), cycles);
    }

    pub fn get(&self, key: &str) -> Option<u64> {
        self.cycles.get(key).copied()
    }
}

/// How a baseline row's cycle count is obtained in recomputed mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RivalModel {
    /// Re-derived from the instruction-timing model.
    Loop(Cpu, LoopKind),
    /// No timing model in scope; the published constant is used in both
    /// modes.
    PublishedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LoopKind {
    Translation,
    Scaling,
}

struct GroupDef {
    algorithm: &'static str,
    n: u32,
    bench_key: &'static str,
    m1_published: u64,
    rivals: [(System, u64, RivalModel); 2],
}

fn group_defs() -> [GroupDef; 6] {
    use RivalModel::*;
    [
        GroupDef {
            algorithm: "translation",
            n: 64,
            bench_key: "translate_64",
            m1_published: 96,
            rivals: [
                (
                    System::I80486,
                    769,
                    Loop(Cpu::I80486, LoopKind::Translation),
                ),
                (
                    System::I80386,
                    1723,
                    Loop(Cpu::I80386, LoopKind::Translation),
                ),
            ],
        },
        GroupDef {
            algorithm: "scaling",
            n: 64,
            bench_key: "scale_64",
            m1_published: 55,
            rivals: [
                (System::I80486, 578, Loop(Cpu::I80486, LoopKind::Scaling)),
                (System::I80386, 1348, Loop(Cpu::I80386, LoopKind::Scaling)),
            ],
        },
        GroupDef {
            algorithm: "rotation-i",
            n: 64,
            bench_key: "matmul_8",
            m1_published: 256,
            rivals: [
                (System::Pentium, 10151, PublishedOnly),
                (System::I80486, 27038, PublishedOnly),
            ],
        },
        GroupDef {
            algorithm: "rotation-ii",
            n: 16,
            bench_key: "matmul_4",
            m1_published: 70,
            rivals: [
                (System::Pentium, 1328, PublishedOnly),
                (System::I80486, 3354, PublishedOnly),
            ],
        },
        GroupDef {
            algorithm: "translation",
            n: 8,
            bench_key: "translate_8",
            m1_published: 21,
            rivals: [
                (System::I80486, 90, Loop(Cpu::I80486, LoopKind::Translation)),
                (
                    System::I80386,
                    220,
                    Loop(Cpu::I80386, LoopKind::Translation),
                ),
            ],
        },
        GroupDef {
            algorithm: "scaling",
            n: 8,
            bench_key: "scale_8",
            m1_published: 14,
            rivals: [
                (System::I80486, 74, Loop(Cpu::I80486, LoopKind::Scaling)),
                (System::I80386, 172, Loop(Cpu::I80386, LoopKind::Scaling)),
            ],
        },
    ]
}

/// Footnotes for cells where the published table's own arithmetic is
/// internally inconsistent; the report body always prints arithmetic truth.
fn published_cell_note(algorithm: &str, n: u32, system: System) -> &'static str {
    match (algorithm, n, system) {
        ("scaling", 64, System::I80486) => {
            "published table prints elements/cycle 0.047, the 80386 value (cells swapped); arithmetic gives 0.111"
        }
        ("scaling", 64, System::I80386) => {
            "published table prints elements/cycle 0.11 (swapped with the 80486 cell) and cycles/element 21.2; arithmetic gives 0.0475 and 21.1"
        }
        ("rotation-i", 64, System::M1) => {
            "published table prints 2.56 (the microsecond time) in this speedup cell; self-speedup is omitted"
        }
        ("translation", 8, System::I80486) => {
            "published table prints cycles/element 11.36; arithmetic gives 11.25"
        }
        ("scaling", 8, System::I80386) => {
            "published table prints elements/cycle 0.46 and cycles/element 21.7; arithmetic gives 0.0465 and 21.5"
        }
        _ => "",
    }
}

fn recompute_rival(cpu: Cpu, kind: LoopKind, n: u32) -> Result<u64, PerfError> {
    let model = match kind {
        LoopKind::Translation => translation_loop(n)?,
        LoopKind::Scaling => scaling_loop(n)?,
    };
    intel_cycles(&model, &TimingTable::intel(cpu))
}

fn join_notes(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}; {b}"),
    }
}

/// Build the 18-row comparison table. `bench` supplies measured M1 cycle
/// counts and is required in [`ReportMode::Recomputed`]; in
/// [`ReportMode::PaperPublished`] it is ignored and the published cycle
/// counts are used throughout.
pub fn build_report(
    mode: ReportMode,
    bench: Option<&BenchResults>,
) -> Result<CycleReport, PerfError> {
    let mut rows = Vec::with_capacity(18);
    for g in group_defs() {
        let (m1_cycles, mut m1_note) = match mode {
            ReportMode::PaperPublished => (g.m1_published, String::new()),
            ReportMode::Recomputed => {
                let bench =
                    bench.ok_or_else(|| PerfError::MissingInput("bench results".to_string()))?;
                let measured = bench
                    .get(g.bench_key)
                    .ok_or_else(|| PerfError::MissingInput(g.bench_key.to_string()))?;
                let note = if measured != g.m1_published {
                    format!(
                        "emulator measures {measured} cycles; published table prints {}",
                        g.m1_published
                    )
                } else {
                    String::new()
                };
                (measured, note)
            }
        };
        m1_note = join_notes(&m1_note, published_cell_note(g.algorithm, g.n, System::M1));
        let m = metrics(m1_cycles, g.n, System::M1.frequency_mhz())?;
        rows.push(ReportRow {
            algorithm: g.algorithm,
            system: System::M1,
            n_elements: g.n,
            cycles: m1_cycles,
            speedup: None,
            time_us: m.time_us,
            elements_per_cycle: m.epc,
            cycles_per_element: m.cpe,
            notes: m1_note,
        });

        for (system, published, model) in g.rivals {
            let (cycles, mut note) = match (mode, model) {
                (ReportMode::PaperPublished, _) => (published, String::new()),
                (ReportMode::Recomputed, RivalModel::PublishedOnly) => (
                    published,
                    "published constant; no timing model for this system".to_string(),
                ),
                (ReportMode::Recomputed, RivalModel::Loop(cpu, kind)) => {
                    let derived = recompute_rival(cpu, kind, g.n)?;
                    let note = if derived != published {
                        format!("loop model gives {derived}; published table prints {published}")
                    } else {
                        String::new()
                    };
                    (derived, note)
                }
            };
            note = join_notes(&note, published_cell_note(g.algorithm, g.n, system));
            let m = metrics(cycles, g.n, system.frequency_mhz())?;
            rows.push(ReportRow {
                algorithm: g.algorithm,
                system,
                n_elements: g.n,
                cycles,
                speedup: Some(speedup(cycles, m1_cycles)?),
                time_us: m.time_us,
                elements_per_cycle: m.epc,
                cycles_per_element: m.cpe,
                notes: note,
            });
        }
    }
    Ok(CycleReport { mode, rows })
}

impl CycleReport {
    fn speedup_cell(row: &ReportRow) -> String {
        row.speedup.map(|s| fmt_fixed(s, 2)).unwrap_or_default()
    }

    /// CSV with the exact column set
    /// `algorithm,system,n_elements,cycles,speedup,time_us,elements_per_cycle,cycles_per_element,mode,notes`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "algorithm",
            "system",
            "n_elements",
            "cycles",
            "speedup",
            "time_us",
            "elements_per_cycle",
            "cycles_per_element",
            "mode",
            "notes",
        ])
        .expect("csv header");
        for row in &self.rows {
            w.write_record([
                row.algorithm.to_string(),
                row.system.name().to_string(),
                row.n_elements.to_string(),
                row.cycles.to_string(),
                Self::speedup_cell(row),
                fmt_sig(row.time_us, 4),
                fmt_sig(row.elements_per_cycle, 3),
                fmt_sig(row.cycles_per_element, 3),
                self.mode.token().to_string(),
                row.notes.clone(),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
    }

    fn algorithm_display(algorithm: &str) -> &'static str {
        match algorithm {
            "translation" => "Translation (vector add)",
            "scaling" => "Scaling (vector × constant)",
            "rotation-i" => "Rotation I (8×8 matrix form)",
            "rotation-ii" => "Rotation II (4×4 matrix form)",
            _ => "",
        }
    }

    /// Markdown table grouped by algorithm, with footnotes collected below.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "## Cycle comparison ({} mode)\n\n",
            self.mode.token()
        ));
        out.push_str(
            "| Algorithm | System | Elements | Cycles | Speedup | Time (µs) | Elem/Cycle | Cycles/Elem |\n",
        );
        out.push_str("|---|---|---:|---:|---:|---:|---:|---:|\n");
        let mut footnotes: Vec<String> = Vec::new();
        let mut last_group: Option<(&str, u32)> = None;
        for row in &self.rows {
            let group = (row.algorithm, row.n_elements);
            let label = if last_group == Some(group) {
                ""
            } else {
                Self::algorithm_display(row.algorithm)
            };
            last_group = Some(group);
            let mut system = row.system.name().to_string();
            if !row.notes.is_empty() {
                footnotes.push(format!(
                    "{}. {} n={} {}: {}",
                    footnotes.len() + 1,
                    row.algorithm,
                    row.n_elements,
                    row.system.name(),
                    row.notes
                ));
                system.push_str(&format!(" [^{}]", footnotes.len()));
            }
            let speedup = row
                .speedup
                .map(|s| fmt_fixed(s, 2))
                .unwrap_or_else(|| "—".to_string());
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
                label,
                system,
                row.n_elements,
                row.cycles,
                speedup,
                fmt_sig(row.time_us, 4),
                fmt_sig(row.elements_per_cycle, 3),
                fmt_sig(row.cycles_per_element, 3),
            ));
        }
        if !footnotes.is_empty() {
            out.push_str("\nNotes:\n");
            for f in footnotes {
                out.push_str(&format!("- {f}\n"));
            }
        }
        out
    }

    /// JSON with the same cell values as the CSV (formatted strings for the
    /// derived columns, integers for counts).
    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                serde_json::json!({
                    "algorithm": row.algorithm,
                    "system": row.system.name(),
                    "n_elements": row.n_elements,
                    "cycles": row.cycles,
                    "speedup": row.speedup.map(|s| fmt_fixed(s, 2)),
                    "time_us": fmt_sig(row.time_us, 4),
                    "elements_per_cycle": fmt_sig(row.elements_per_cycle, 3),
                    "cycles_per_element": fmt_sig(row.cycles_per_element, 3),
                    "mode": self.mode.token(),
                    "notes": row.notes,
                })
            })
            .collect();
        let doc = serde_json::json!({ "mode": self.mode.token(), "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("report json");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycles(kind: LoopKind, cpu: Cpu, n: u32) -> u64 {
        recompute_rival(cpu, kind, n).unwrap()
    }

    #[test]
    fn exact_reproduction_set() {
        assert_eq!(cycles(LoopKind::Translation, Cpu::I80486, 8), 90);
        assert_eq!(cycles(LoopKind::Translation, Cpu::I80386, 8), 220);
        assert_eq!(cycles(LoopKind::Scaling, Cpu::I80486, 8), 74);
        assert_eq!(cycles(LoopKind::Scaling, Cpu::I80386, 8), 172);
        assert_eq!(cycles(LoopKind::Scaling, Cpu::I80486, 64), 578);
        assert_eq!(cycles(LoopKind::Scaling, Cpu::I80386, 64), 1348);
    }

    #[test]
    fn pinned_discrepancy_for_translation_64() {
        assert_eq!(cycles(LoopKind::Translation, Cpu::I80486, 64), 706);
        assert_eq!(cycles(LoopKind::Translation, Cpu::I80386, 64), 1732);
    }

    #[test]
    fn single_iteration_is_setup_plus_one_untaken_body() {
        let model = translation_loop(1).unwrap();
        let total = intel_cycles(&model, &TimingTable::intel(Cpu::I80486)).unwrap();
        // setup 4, body with jnz not taken 9
        assert_eq!(total, 13);
    }

    #[test]
    fn zero_iterations_rejected() {
        assert_eq!(
            translation_loop(0).unwrap_err(),
            PerfError::InvalidIterations
        );
    }

    #[test]
    fn missing_class_is_reported() {
        let mut table = TimingTable::empty(Cpu::I80486);
        table.set_jnz(3, 1);
        let model = scaling_loop(2).unwrap();
        let err = intel_cycles(&model, &table).unwrap_err();
        assert!(matches!(err, PerfError::UnknownInstructionClass(_)));
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(96, 64, 100).unwrap();
        assert_eq!(fmt_sig(m.epc, 3), "0.667");
        assert_eq!(fmt_sig(m.cpe, 3), "1.5");
        assert_eq!(fmt_sig(m.time_us, 4), "0.96");

        let m = metrics(578, 64, 100).unwrap();
        assert_eq!(fmt_sig(m.epc, 3), "0.111");
        assert_eq!(fmt_sig(m.cpe, 3), "9.03");
        assert_eq!(fmt_sig(m.time_us, 4), "5.78");

        let m = metrics(55, 64, 100).unwrap();
        assert_eq!(fmt_sig(m.epc, 3), "1.16");
        assert_eq!(fmt_sig(m.cpe, 3), "0.859");

        // One cycle per element.
        let m = metrics(17, 17, 133).unwrap();
        assert_eq!(fmt_sig(m.epc, 3), "1");

        assert_eq!(metrics(0, 4, 100).unwrap_err(), PerfError::DivisionByZero);
        assert_eq!(metrics(4, 0, 100).unwrap_err(), PerfError::DivisionByZero);
        assert_eq!(metrics(4, 4, 0).unwrap_err(), PerfError::DivisionByZero);
    }

    #[test]
    fn epc_cpe_product_is_exactly_one() {
        for report in [
            build_report(ReportMode::PaperPublished, None).unwrap(),
            build_report(ReportMode::Recomputed, Some(&fake_bench())).unwrap(),
        ] {
            for row in &report.rows {
                assert_eq!(
                    row.elements_per_cycle * row.cycles_per_element,
                    Rational64::new(1, 1),
                    "{} {}",
                    row.algorithm,
                    row.system.name()
                );
            }
        }
    }

    #[test]
    fn speedup_antisymmetry() {
        for (a, b) in [(769u64, 96u64), (1348, 55), (3354, 70), (90, 21), (7, 7)] {
            let ab = speedup(a, b).unwrap();
            let ba = speedup(b, a).unwrap();
            assert_eq!(ab * ba, Rational64::new(1, 1));
        }
        assert_eq!(speedup(96, 96).unwrap(), Rational64::new(1, 1));
    }

    fn fake_bench() -> BenchResults {
        let mut b = BenchResults::default();
        for (key, cycles) in [
            ("translate_64", 97u64),
            ("translate_8", 20),
            ("scale_64", 56),
            ("scale_8", 14),
            ("matmul_8", 203),
            ("matmul_4", 71),
        ] {
            b.set(key, cycles);
        }
        b
    }

    #[test]
    fn paper_mode_reproduces_the_published_speedups() {
        let report = build_report(ReportMode::PaperPublished, None).unwrap();
        assert_eq!(report.rows.len(), 18);
        let expected = [
            ("translation", 64, "80486", 8.01),
            ("translation", 64, "80386", 17.94),
            ("scaling", 64, "80486", 10.51),
            ("scaling", 64, "80386", 24.51),
            ("rotation-i", 64, "Pentium", 39.65),
            ("rotation-i", 64, "80486", 105.62),
            ("rotation-ii", 16, "Pentium", 18.97),
            ("rotation-ii", 16, "80486", 47.91),
            ("translation", 8, "80486", 4.29),
            ("translation", 8, "80386", 10.48),
            ("scaling", 8, "80486", 5.28),
            ("scaling", 8, "80386", 12.29),
        ];
        for (alg, n, system, target) in expected {
            let row = report
                .rows
                .iter()
                .find(|r| r.algorithm == alg && r.n_elements == n && r.system.name() == system)
                .unwrap();
            let got = row.speedup.unwrap();
            let got = *got.numer() as f64 / *got.denom() as f64;
            assert!(
                (got - target).abs() / target <= 0.005,
                "{alg} n={n} {system}: got {got}, want {target}"
            );
        }
        // M1 rows carry no speedup.
        assert!(report
            .rows
            .iter()
            .filter(|r| r.system == System::M1)
            .all(|r| r.speedup.is_none()));
    }

    #[test]
    fn recomputed_mode_needs_bench_results() {
        assert!(matches!(
            build_report(ReportMode::Recomputed, None).unwrap_err(),
            PerfError::MissingInput(_)
        ));
        let mut partial = fake_bench();
        partial.cycles.remove("matmul_4");
        match build_report(ReportMode::Recomputed, Some(&partial)).unwrap_err() {
            PerfError::MissingInput(key) => assert_eq!(key, "matmul_4"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn recomputed_mode_footnotes_the_translation_64_cycles() {
        let report = build_report(ReportMode::Recomputed, Some(&fake_bench())).unwrap();
        let find = |system: &str| {
            report
                .rows
                .iter()
                .find(|r| {
                    r.algorithm == "translation" && r.n_elements == 64 && r.system.name() == system
                })
                .unwrap()
        };
        let r486 = find("80486");
        assert_eq!(r486.cycles, 706);
        assert!(r486.notes.contains("769"), "note: {}", r486.notes);
        let r386 = find("80386");
        assert_eq!(r386.cycles, 1732);
        assert!(r386.notes.contains("1723"), "note: {}", r386.notes);
        // Published constants stay pinned where no model exists.
        let pent = report
            .rows
            .iter()
            .find(|r| r.algorithm == "rotation-i" && r.system == System::Pentium)
            .unwrap();
        assert_eq!(pent.cycles, 10151);
    }

    #[test]
    fn csv_layout_and_determinism() {
        let report = build_report(ReportMode::PaperPublished, None).unwrap();
        let csv = report.to_csv();
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "algorithm,system,n_elements,cycles,speedup,time_us,elements_per_cycle,cycles_per_element,mode,notes"
        );
        assert_eq!(csv.lines().count(), 19);
        assert_eq!(csv, report.to_csv());
        let again = build_report(ReportMode::PaperPublished, None).unwrap();
        assert_eq!(csv, again.to_csv());
        // The M1 translation row keeps its speedup cell empty.
        let m1_row = csv
            .lines()
            .find(|l| l.starts_with("translation,M1,64"))
            .unwrap();
        assert_eq!(m1_row.split(',').nth(4), Some(""));
    }

    #[test]
    fn markdown_marks_m1_speedups_with_a_dash() {
        let report = build_report(ReportMode::PaperPublished, None).unwrap();
        let md = report.to_markdown();
        assert!(md.contains("| M1 "));
        assert!(md.contains(" — "));
        assert!(md.contains("Rotation I (8×8 matrix form)"));
        // The swapped elements/cycle cells are footnoted even in paper mode.
        assert!(md.contains("cells swapped"));
    }

    #[test]
    fn formatting_helpers() {
        assert_eq!(fmt_fixed(Rational64::new(769, 96), 2), "8.01");
        assert_eq!(fmt_fixed(Rational64::new(1723, 96), 2), "17.95");
        assert_eq!(fmt_fixed(Rational64::new(27038, 256), 2), "105.62");
        assert_eq!(fmt_sig(Rational64::new(1723, 40), 4), "43.08");
        assert_eq!(fmt_sig(Rational64::new(769, 64), 3), "12");
        assert_eq!(fmt_sig(Rational64::new(0, 1), 3), "0");
        assert_eq!(fmt_sig(Rational64::new(-3, 2), 3), "-1.5");
        assert_eq!(fmt_sig(Rational64::new(999, 100), 2), "10");
        assert_eq!(fmt_fixed(Rational64::new(-1, 200), 2), "-0.01");
    }

    #[test]
    fn bench_results_json_roundtrip() {
        let b = fake_bench();
        let text = serde_json::to_string_pretty(&b).unwrap();
        let back: BenchResults = serde_json::from_str(&text).unwrap();
        assert_eq!(b, back);
        assert!(BENCH_KEYS.iter().all(|k| back.get(k).is_some()));
    }
}
