//! Kernel generators and golden models for the three mapped algorithms:
//! vector translation (elementwise add), uniform scaling (multiply by a
//! constant), and rotation/composite transforms expressed as matrix-matrix
//! multiplication.
//!
//! Each generator emits a straight-line TinyRISC program, the initial
//! main-memory image it expects (operands plus encoded context words), an
//! extractor describing where the result lands, and a per-phase cycle
//! breakdown. The golden models are plain integer reference implementations
//! used as correctness oracles for the emulated kernels.
//!
//! Data layout: 2-D point sets are packed coordinate-major (all x values,
//! then all y values), so translation is one vector-vector add and uniform
//! scaling one vector-scalar pass over the packed block. Matrices are stored
//! row-major; a generated matmul leaves C transposed in memory (column j of
//! the array holds column j of C), which the extractor undoes.

use std::fmt;

use thiserror::Error;

use crate::asm::{Mnemonic, Operand, TrInstruction, TrProgram};
use crate::context::{encode_context_word, ContextWord};
use crate::emu::{self, DmaConfig, EmuError};
use crate::machine::{MachineState, MainMemory};
use crate::memimage::{apply_image, ImageEntry};

/// A 2-D point with 16-bit signed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Vec2 {
    pub x: i16,
    pub y: i16,
}

impl Vec2 {
    pub fn new(x: i16, y: i16) -> Self {
        Vec2 { x, y }
    }
}

/// Which algorithm a kernel runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Translate,
    ScaleUniform,
    MatMul,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Translate => "translate",
            KernelKind::ScaleUniform => "scale",
            KernelKind::MatMul => "matmul",
        }
    }
}

/// Where a kernel's operands, context image, and result live in main memory.
/// Every address must be 64 KiB-aligned so a single `ldui` materializes it;
/// the matmul kernel stages row i's context block at `ctx_addr + i * 0x10000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelAddresses {
    pub u_addr: u32,
    pub v_addr: u32,
    pub ctx_addr: u32,
    pub result_addr: u32,
}

impl KernelAddresses {
    /// Layout used by the vector listings: u at 0x10000, v at 0x20000,
    /// context image at 0x30000, result at 0x40000.
    pub fn vector_defaults() -> Self {
        KernelAddresses {
            u_addr: 0x10000,
            v_addr: 0x20000,
            ctx_addr: 0x30000,
            result_addr: 0x40000,
        }
    }

    /// Matmul layout: B at `u_addr`, per-row context pages from `ctx_addr`
    /// (row i at `ctx_addr + i * 0x10000`, so pages 3..=10 for n = 8), and
    /// the result past the highest context page.
    pub fn matmul_defaults() -> Self {
        KernelAddresses {
            result_addr: 0xB0000,
            ..KernelAddresses::vector_defaults()
        }
    }
}

impl Default for KernelAddresses {
    fn default() -> Self {
        KernelAddresses::vector_defaults()
    }
}

/// A kernel configuration: algorithm, problem size (vector length for the
/// vector kinds, matrix dimension for matmul), the scaling constant, and the
/// memory layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub n: u32,
    pub constant: i16,
    pub addresses: KernelAddresses,
}

impl KernelSpec {
    pub fn translate(n: u32) -> Self {
        KernelSpec {
            kind: KernelKind::Translate,
            n,
            constant: 0,
            addresses: KernelAddresses::default(),
        }
    }

    pub fn scale(n: u32, constant: i16) -> Self {
        KernelSpec {
            kind: KernelKind::ScaleUniform,
            n,
            constant,
            addresses: KernelAddresses::default(),
        }
    }

    pub fn matmul(n: u32) -> Self {
        KernelSpec {
            kind: KernelKind::MatMul,
            n,
            constant: 0,
            addresses: KernelAddresses::matmul_defaults(),
        }
    }
}

/// Runtime operand data for a kernel, shaped per kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelInputs {
    Translate { u: Vec<i16>, v: Vec<i16> },
    Scale { u: Vec<i16> },
    MatMul { a: Vec<Vec<i16>>, b: Vec<Vec<i16>> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("unsupported kernel spec: {0}")]
    UnsupportedSpec(String),
    #[error(transparent)]
    Emulation(#[from] EmuError),
}

fn unsupported(msg: impl Into<String>) -> KernelError {
    KernelError::UnsupportedSpec(msg.into())
}

// ---------------------------------------------------------------------------
// Golden models
// ---------------------------------------------------------------------------

/// Exact and wrapped-to-16-bit views of an integer vector result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenVector {
    pub exact: Vec<i32>,
    pub wrapped: Vec<i16>,
}

impl GoldenVector {
    fn from_exact(exact: Vec<i32>) -> Self {
        let wrapped = exact.iter().map(|&v| v as i16).collect();
        GoldenVector { exact, wrapped }
    }
}

/// Exact and wrapped views of a matrix result (row-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenMatrix {
    pub exact: Vec<Vec<i64>>,
    pub wrapped: Vec<Vec<i16>>,
}

/// Exact and wrapped views of a transformed point set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenPoints {
    pub exact: Vec<(i32, i32)>,
    pub wrapped: Vec<Vec2>,
}

impl GoldenPoints {
    fn from_exact(exact: Vec<(i32, i32)>) -> Self {
        let wrapped = exact
            .iter()
            .map(|&(x, y)| Vec2::new(x as i16, y as i16))
            .collect();
        GoldenPoints { exact, wrapped }
    }
}

/// q = p + t, componentwise.
pub fn golden_translate(points: &[Vec2], t: Vec2) -> GoldenPoints {
    GoldenPoints::from_exact(
        points
            .iter()
            .map(|p| {
                (
                    i32::from(p.x) + i32::from(t.x),
                    i32::from(p.y) + i32::from(t.y),
                )
            })
            .collect(),
    )
}

/// q = diag(sx, sy) * p.
pub fn golden_scale(points: &[Vec2], sx: i16, sy: i16) -> GoldenPoints {
    GoldenPoints::from_exact(
        points
            .iter()
            .map(|p| {
                (
                    i32::from(sx) * i32::from(p.x),
                    i32::from(sy) * i32::from(p.y),
                )
            })
            .collect(),
    )
}

/// Elementwise vector add.
pub fn golden_vector_add(u: &[i16], v: &[i16]) -> GoldenVector {
    assert_eq!(u.len(), v.len(), "operand lengths must match");
    GoldenVector::from_exact(
        u.iter()
            .zip(v)
            .map(|(&a, &b)| i32::from(a) + i32::from(b))
            .collect(),
    )
}

/// Vector times scalar.
pub fn golden_vector_scale(c: i16, u: &[i16]) -> GoldenVector {
    GoldenVector::from_exact(u.iter().map(|&a| i32::from(c) * i32::from(a)).collect())
}

/// Exact n-by-n integer matrix product by the O(n^3) triple loop.
pub fn golden_matmul(a: &[Vec<i16>], b: &[Vec<i16>]) -> GoldenMatrix {
    let n = a.len();
    assert!(b.len() == n && a.iter().chain(b).all(|row| row.len() == n));
    let mut exact = vec![vec![0i64; n]; n];
    for (i, row) in exact.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            *out = (0..n)
                .map(|k| i64::from(a[i][k]) * i64::from(b[k][j]))
                .sum();
        }
    }
    let wrapped = exact
        .iter()
        .map(|row| row.iter().map(|&v| v as i16).collect())
        .collect();
    GoldenMatrix { exact, wrapped }
}

/// Coordinate-major packing: all x values, then all y values.
pub fn pack_points(points: &[Vec2]) -> Vec<i16> {
    points
        .iter()
        .map(|p| p.x)
        .chain(points.iter().map(|p| p.y))
        .collect()
}

/// Inverse of [`pack_points`]; `flat` must have even length.
pub fn unpack_points(flat: &[i16]) -> Vec<Vec2> {
    assert!(
        flat.len().is_multiple_of(2),
        "packed point block has even length"
    );
    let n = flat.len() / 2;
    (0..n).map(|i| Vec2::new(flat[i], flat[n + i])).collect()
}

// ---------------------------------------------------------------------------
// Program generation
// ---------------------------------------------------------------------------

/// Where a kernel's result lives in final main memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultExtractor {
    /// `n` consecutive 16-bit elements at `addr`.
    Vector { addr: u32, n: u32 },
    /// An n-by-n matrix stored transposed: C[i][j] at `addr + 2*(8*j + i)`.
    MatrixTransposed { addr: u32, n: u32 },
}

/// Extracted kernel result values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelValues {
    Vector(Vec<i16>),
    Matrix(Vec<Vec<i16>>),
}

impl KernelValues {
    pub fn as_vector(&self) -> Option<&[i16]> {
        match self {
            KernelValues::Vector(v) => Some(v),
            KernelValues::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&[Vec<i16>]> {
        match self {
            KernelValues::Matrix(m) => Some(m),
            KernelValues::Vector(_) => None,
        }
    }
}

impl ResultExtractor {
    pub fn extract(&self, mem: &MainMemory) -> KernelValues {
        match *self {
            ResultExtractor::Vector { addr, n } => {
                KernelValues::Vector((0..n).map(|i| mem.read16(addr + 2 * i)).collect())
            }
            ResultExtractor::MatrixTransposed { addr, n } => KernelValues::Matrix(
                (0..n)
                    .map(|i| (0..n).map(|j| mem.read16(addr + 2 * (8 * j + i))).collect())
                    .collect(),
            ),
        }
    }
}

/// Instruction counts by program phase; `Display` prints one line per phase
/// plus the total.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CycleBreakdown {
    pub phases: Vec<(String, usize)>,
}

impl CycleBreakdown {
    pub fn total(&self) -> usize {
        self.phases.iter().map(|(_, n)| n).sum()
    }
}

impl fmt::Display for CycleBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, count) in &self.phases {
            writeln!(f, "  {count:>4}  {label}")?;
        }
        write!(f, "  {:>4}  total", self.total())
    }
}

/// A generated kernel: the program, the memory image it expects, where the
/// result lands, and the phase breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedKernel {
    pub program: TrProgram,
    pub image: Vec<ImageEntry>,
    pub extractor: ResultExtractor,
    pub breakdown: CycleBreakdown,
}

/// A completed kernel run.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRun {
    pub values: KernelValues,
    pub cycle_count: u64,
    pub instruction_count: usize,
    pub breakdown: CycleBreakdown,
}

struct ProgramBuilder {
    instructions: Vec<TrInstruction>,
    phases: Vec<(String, usize)>,
    mark: usize,
}

impl ProgramBuilder {
    fn new() -> Self {
        ProgramBuilder {
            instructions: Vec::new(),
            phases: Vec::new(),
            mark: 0,
        }
    }

    fn push(&mut self, mnemonic: Mnemonic, operands: Vec<Operand>) {
        self.instructions
            .push(TrInstruction::new(mnemonic, operands));
    }

    /// Pad out a DMA window: (window - 1) no-ops, so the next instruction
    /// issues exactly when the engine frees up.
    fn wait(&mut self, window: u64) {
        for _ in 1..window {
            self.instructions.push(TrInstruction::nop());
        }
    }

    fn phase(&mut self, label: &str) {
        let count = self.instructions.len() - self.mark;
        self.phases.push((label.to_string(), count));
        self.mark = self.instructions.len();
    }

    fn finish(self) -> (TrProgram, CycleBreakdown) {
        debug_assert_eq!(
            self.mark,
            self.instructions.len(),
            "unlabeled trailing phase"
        );
        (
            TrProgram {
                instructions: self.instructions,
            },
            CycleBreakdown {
                phases: self.phases,
            },
        )
    }
}

fn reg(r: u8) -> Operand {
    Operand::Reg(r)
}

fn imm(v: u32) -> Operand {
    Operand::Imm(v)
}

/// Check that an address is 64 KiB-aligned and return its upper half.
fn page_of(addr: u32, what: &str) -> Result<u32, KernelError> {
    if addr & 0xFFFF != 0 {
        return Err(unsupported(format!(
            "{what} address 0x{addr:X} is not 64 KiB-aligned (ldui loads only the upper half)"
        )));
    }
    Ok(addr >> 16)
}

fn check_distinct_pages(pages: &[u32]) -> Result<(), KernelError> {
    let mut sorted = pages.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != pages.len() {
        return Err(unsupported(
            "operand, context, and result regions overlap".to_string(),
        ));
    }
    Ok(())
}

fn check_imm12(value: i16, what: &str) -> Result<(), KernelError> {
    if !(-2048..=2047).contains(&value) {
        return Err(unsupported(format!(
            "{what} {value} does not fit a 12-bit context immediate"
        )));
    }
    Ok(())
}

/// Pack 16-bit elements into 32-bit image words at `addr` (little-endian,
/// two elements per word).
fn vector_image(addr: u32, values: &[i16]) -> Vec<ImageEntry> {
    values
        .chunks(2)
        .enumerate()
        .map(|(i, pair)| {
            let lo = pair[0] as u16 as u32;
            let hi = pair.get(1).map(|&v| v as u16 as u32).unwrap_or(0);
            ImageEntry {
                addr: addr + 4 * i as u32,
                word: lo | (hi << 16),
            }
        })
        .collect()
}

fn raw_word(cw: &ContextWord) -> u32 {
    encode_context_word(cw).expect("generator emits only representable words")
}

fn check_vector_len(values: &[i16], n: u32, what: &str) -> Result<(), KernelError> {
    if values.len() != n as usize {
        return Err(unsupported(format!(
            "{what} has {} elements, spec says {n}",
            values.len()
        )));
    }
    Ok(())
}

/// Emit the shared vector-kernel tail: one broadcast per column block, one
/// writeback per column, then the store.
fn vector_tail(
    b: &mut ProgramBuilder,
    blocks: u32,
    beats: u32,
    result_page: u32,
    broadcast: impl Fn(u32) -> (Mnemonic, Vec<Operand>),
) {
    for k in 0..blocks {
        let (m, ops) = broadcast(k);
        b.push(m, ops);
    }
    b.phase("column broadcasts");
    for k in 0..blocks {
        b.push(
            Mnemonic::Wfbi,
            vec![imm(k), imm(0), imm(0), imm(1), imm(0x40 * k)],
        );
    }
    b.phase("write back outputs");
    b.push(Mnemonic::Ldui, vec![reg(5), imm(result_page)]);
    b.push(Mnemonic::Stfb, vec![reg(5), imm(1), imm(0), imm(beats)]);
    b.phase("store result");
}

fn generate_vector_kernel(
    spec: &KernelSpec,
    u: &[i16],
    v: Option<&[i16]>,
    dma: DmaConfig,
) -> Result<GeneratedKernel, KernelError> {
    if spec.n != 8 && spec.n != 64 {
        return Err(unsupported(format!(
            "vector kernels support 8 or 64 elements, not {}",
            spec.n
        )));
    }
    let a = spec.addresses;
    let u_page = page_of(a.u_addr, "operand u")?;
    let ctx_page = page_of(a.ctx_addr, "context")?;
    let result_page = page_of(a.result_addr, "result")?;
    let mut pages = vec![u_page, ctx_page, result_page];
    let v_page = if v.is_some() {
        let p = page_of(a.v_addr, "operand v")?;
        pages.push(p);
        p
    } else {
        0
    };
    check_distinct_pages(&pages)?;
    check_vector_len(u, spec.n, "u")?;
    if let Some(v) = v {
        check_vector_len(v, spec.n, "v")?;
    }

    let beats = spec.n / 4; // 4 elements per 64-bit beat
    let blocks = spec.n / 8; // 8 elements per column block
    let mut b = ProgramBuilder::new();

    b.push(Mnemonic::Ldui, vec![reg(1), imm(u_page)]);
    b.push(Mnemonic::Ldfb, vec![reg(1), imm(0), imm(0), imm(beats)]);
    b.wait(dma.fb_window(beats));
    b.phase("load u into bank A");
    if v.is_some() {
        b.push(Mnemonic::Ldui, vec![reg(1), imm(v_page)]);
        b.push(Mnemonic::Ldfb, vec![reg(1), imm(1), imm(0), imm(beats)]);
        b.wait(dma.fb_window(beats));
        b.phase("load v into bank B");
    }
    b.push(Mnemonic::Ldui, vec![reg(3), imm(ctx_page)]);
    b.push(
        Mnemonic::Ldctxt,
        vec![reg(3), imm(0), imm(0), imm(0), imm(1)],
    );
    b.wait(dma.ctx_window(1));
    b.phase("load context word");

    let (cw, mut image) = match spec.kind {
        KernelKind::Translate => (ContextWord::add(), vector_image(a.v_addr, v.unwrap())),
        KernelKind::ScaleUniform => {
            check_imm12(spec.constant, "scaling constant")?;
            (ContextWord::cmul(spec.constant), Vec::new())
        }
        KernelKind::MatMul => unreachable!(),
    };
    image.extend(vector_image(a.u_addr, u));
    image.push(ImageEntry {
        addr: a.ctx_addr,
        word: raw_word(&cw),
    });
    image.sort_by_key(|e| e.addr);

    if spec.kind == KernelKind::Translate {
        // The broadcast offset register mirrors the listing: loaded to 0 up
        // front, stepped before each subsequent column.
        b.push(Mnemonic::Ldui, vec![reg(4), imm(0)]);
        b.phase("clear offset register");
    }
    let kind = spec.kind;
    vector_tail(&mut b, blocks, beats, result_page, |k| match kind {
        KernelKind::Translate => (
            Mnemonic::Dbcdc,
            vec![
                reg(4),
                imm(0),
                imm(0),
                imm(k),
                imm(0),
                imm(0),
                imm(0x40 * k),
            ],
        ),
        _ => (
            Mnemonic::Sbc,
            vec![
                imm(1),
                imm(0),
                imm(0),
                imm(0),
                imm(0),
                imm(0),
                imm(0x40 * k),
            ],
        ),
    });

    // The translate listing steps r4 with ldli between broadcasts; splice
    // those in to stay operand-identical to it.
    let (mut program, mut breakdown) = b.finish();
    if spec.kind == KernelKind::Translate && blocks > 1 {
        let first_broadcast = program
            .instructions
            .iter()
            .position(|i| i.mnemonic == Mnemonic::Dbcdc)
            .expect("translate programs broadcast");
        for k in (1..blocks).rev() {
            program.instructions.insert(
                first_broadcast + k as usize,
                TrInstruction::new(Mnemonic::Ldli, vec![reg(4), imm(4 * k)]),
            );
        }
        for (label, count) in &mut breakdown.phases {
            if label == "column broadcasts" {
                *count += blocks as usize - 1;
            }
        }
    }

    Ok(GeneratedKernel {
        program,
        image,
        extractor: ResultExtractor::Vector {
            addr: a.result_addr,
            n: spec.n,
        },
        breakdown,
    })
}

fn generate_matmul_kernel(
    spec: &KernelSpec,
    a_mat: &[Vec<i16>],
    b_mat: &[Vec<i16>],
    dma: DmaConfig,
) -> Result<GeneratedKernel, KernelError> {
    let n = spec.n;
    if n != 4 && n != 8 {
        return Err(unsupported(format!(
            "matmul supports 4x4 or 8x8 matrices, not {n}x{n}"
        )));
    }
    let addrs = spec.addresses;
    let b_page = page_of(addrs.u_addr, "matrix B")?;
    let ctx_page = page_of(addrs.ctx_addr, "context")?;
    let result_page = page_of(addrs.result_addr, "result")?;
    let mut pages: Vec<u32> = vec![b_page, result_page];
    pages.extend((0..n).map(|i| ctx_page + i));
    check_distinct_pages(&pages)?;

    let dims_ok = |m: &[Vec<i16>]| m.len() == n as usize && m.iter().all(|r| r.len() == n as usize);
    if !dims_ok(a_mat) || !dims_ok(b_mat) {
        return Err(unsupported(format!("matrices must be {n}x{n}")));
    }
    for row in a_mat {
        for &v in row {
            // A's entries ride in context immediates; B's come from the
            // frame buffer and may use the full 16 bits.
            check_imm12(v, "matrix A entry")?;
        }
    }

    // B lands corner-turned so that B[k][j] sits at frame-buffer byte
    // 0x40*k + 2*j: row k of B occupies column block k, i.e. element 8k+j of
    // the image. Slots j >= n of a block are padding.
    let mut flat = vec![0i16; 8 * n as usize];
    for (k, row) in b_mat.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            flat[8 * k + j] = v;
        }
    }
    let mut image = vector_image(addrs.u_addr, &flat);
    // Row i of A becomes context block i in the row plane: CMUL(A[i][0]) to
    // seed the accumulator at step 0, then MULADD(A[i][k]) for k = 1..n.
    for (i, row) in a_mat.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let cw = if k == 0 {
                ContextWord::cmul(v)
            } else {
                ContextWord::muladd(v)
            };
            image.push(ImageEntry {
                addr: addrs.ctx_addr + 0x10000 * i as u32 + 4 * k as u32,
                word: raw_word(&cw),
            });
        }
    }
    image.sort_by_key(|e| e.addr);

    let beats = 2 * n; // n column blocks of 8 elements, 4 elements per beat
    let mut b = ProgramBuilder::new();
    b.push(Mnemonic::Ldui, vec![reg(1), imm(b_page)]);
    b.push(Mnemonic::Ldfb, vec![reg(1), imm(0), imm(0), imm(beats)]);
    b.wait(dma.fb_window(beats));
    b.phase("load matrix B");
    for i in 0..n {
        b.push(Mnemonic::Ldui, vec![reg(3), imm(ctx_page + i)]);
        b.push(
            Mnemonic::Ldctxt,
            vec![reg(3), imm(1), imm(i), imm(0), imm(n)],
        );
        b.wait(dma.ctx_window(n));
    }
    b.phase("load row-context blocks (rows of A)");
    for k in 0..n {
        b.push(
            Mnemonic::Rbc,
            vec![
                imm(1),
                imm(0),
                imm(0),
                imm(k),
                imm(1),
                imm(0),
                imm(0x40 * k),
            ],
        );
    }
    b.phase("row broadcasts (one per k)");
    for j in 0..n {
        b.push(
            Mnemonic::Wfbi,
            vec![imm(j), imm(0), imm(0), imm(1), imm(0x40 * j)],
        );
    }
    b.phase("write back outputs");
    b.push(Mnemonic::Ldui, vec![reg(5), imm(result_page)]);
    b.push(Mnemonic::Stfb, vec![reg(5), imm(1), imm(0), imm(beats)]);
    b.phase("store result");

    let (program, breakdown) = b.finish();
    Ok(GeneratedKernel {
        program,
        image,
        extractor: ResultExtractor::MatrixTransposed {
            addr: addrs.result_addr,
            n,
        },
        breakdown,
    })
}

/// Generate the program, memory image, extractor, and breakdown for a spec.
pub fn generate_program(
    spec: &KernelSpec,
    inputs: &KernelInputs,
    dma: DmaConfig,
) -> Result<GeneratedKernel, KernelError> {
    match (spec.kind, inputs) {
        (KernelKind::Translate, KernelInputs::Translate { u, v }) => {
            generate_vector_kernel(spec, u, Some(v), dma)
        }
        (KernelKind::ScaleUniform, KernelInputs::Scale { u }) => {
            generate_vector_kernel(spec, u, None, dma)
        }
        (KernelKind::MatMul, KernelInputs::MatMul { a, b }) => {
            generate_matmul_kernel(spec, a, b, dma)
        }
        _ => Err(unsupported(
            "input data shape does not match the kernel kind".to_string(),
        )),
    }
}

/// Generate, emulate, and extract: the full pipeline for one kernel run.
pub fn run_kernel(
    spec: &KernelSpec,
    inputs: &KernelInputs,
    dma: DmaConfig,
) -> Result<KernelRun, KernelError> {
    let generated = generate_program(spec, inputs, dma)?;
    let mut state = MachineState::default();
    apply_image(&mut state.mem, &generated.image);
    let (final_state, _trace) = emu::run(&generated.program, state, dma)?;
    Ok(KernelRun {
        values: generated.extractor.extract(&final_state.mem),
        cycle_count: final_state.tinyrisc.cycle_counter,
        instruction_count: generated.program.len(),
        breakdown: generated.breakdown,
    })
}

// ---------------------------------------------------------------------------
// Fixed-point trigonometry (golden-model only)
// ---------------------------------------------------------------------------

/// Q1.14 sine/cosine for arbitrary-angle rotation golden models. The RC-array
/// path cannot run these directly — a Q1.14 coefficient needs 15 bits and
/// context immediates carry 12 — so arbitrary angles stay a golden-model
/// feature while right-angle rotations map exactly onto integer matmul.
pub mod trig {
    use super::Vec2;

    /// One in Q1.14.
    pub const Q14_ONE: i32 = 1 << 14;

    /// `round(sin(d degrees) * 2^14)` for d in 0..=90.
    pub const SIN_Q14: [i16; 91] = [
        0, 286, 572, 857, 1143, 1428, 1713, 1997, 2280, 2563, 2845, 3126, 3406, 3686, 3964, 4240,
        4516, 4790, 5063, 5334, 5604, 5872, 6138, 6402, 6664, 6924, 7182, 7438, 7692, 7943, 8192,
        8438, 8682, 8923, 9162, 9397, 9630, 9860, 10087, 10311, 10531, 10749, 10963, 11174, 11381,
        11585, 11786, 11982, 12176, 12365, 12551, 12733, 12911, 13085, 13255, 13421, 13583, 13741,
        13894, 14044, 14189, 14330, 14466, 14598, 14726, 14849, 14968, 15082, 15191, 15296, 15396,
        15491, 15582, 15668, 15749, 15826, 15897, 15964, 16026, 16083, 16135, 16182, 16225, 16262,
        16294, 16322, 16344, 16362, 16374, 16382, 16384,
    ];

    /// (sin, cos) in Q1.14 for any integer degree, by quadrant symmetry.
    pub fn sin_cos_q14(deg: i32) -> (i32, i32) {
        let d = deg.rem_euclid(360);
        let s = |i: i32| i32::from(SIN_Q14[i as usize]);
        match d {
            0..=90 => (s(d), s(90 - d)),
            91..=180 => (s(180 - d), -s(d - 90)),
            181..=270 => (-s(d - 180), -s(270 - d)),
            _ => (-s(360 - d), s(d - 270)),
        }
    }

    /// Rotate a point by an integer angle, rounding each coordinate half-up.
    pub fn rotate_q14(p: Vec2, deg: i32) -> Vec2 {
        let (sin, cos) = sin_cos_q14(deg);
        let x = i32::from(p.x);
        let y = i32::from(p.y);
        let round = |t: i32| (t + Q14_ONE / 2) >> 14;
        Vec2::new(
            round(cos * x - sin * y) as i16,
            round(sin * x + cos * y) as i16,
        )
    }
}
