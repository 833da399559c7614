use super::builder::{flux_inputs, Builder, NV};
use super::ir::{Addr, ConstMode, Guard, IndexExpr, Instr, KernelIR, KernelMeta, Limit, Operand, Reg, IR_VERSION};
use super::options::{Method, OptionSet};
use super::{check_config, CodegenError, MAX_SHARED_BYTES};
use crate::fr::{ConstTable, ElementConfig, OperatorMatrix, SOA_WIDTH};
use crate::memory::{deconflict_layout, ElementLayout, LineRegister, ManagerState, Priority, Space};

const WARP: usize = 32;

/// Smallest shared allocation the managed planar kernel accepts: one plane
/// of every thread in the block.
pub fn planar_min_smem(cfg: &ElementConfig) -> usize {
    NV * cfg.m() * cfg.block_threads * cfg.precision.word_bytes()
}

/// Largest shared allocation the managed planar kernel can use.
pub fn planar_max_smem(cfg: &ElementConfig) -> usize {
    let slot = cfg.block_threads * cfg.precision.word_bytes();
    MAX_SHARED_BYTES / slot * slot
}

/// Operator coefficients, either inlined or read from the constant table.
struct Coeffs {
    d: OperatorMatrix,
    /// Per matrix entry, the register holding it when read from the table.
    table_regs: Option<Vec<Option<Reg>>>,
    /// `D[k][l]` for the thread's own `k`, one register per `l`.
    dz: Vec<Reg>,
    const_table: Vec<f64>,
}

impl Coeffs {
    fn new(b: &mut Builder, d: OperatorMatrix, k_base: usize, cmem: bool) -> Self {
        let m = d.m();
        if !cmem {
            let dz = (0..m)
                .map(|l| {
                    let dst = b.reg();
                    let values = (0..m).map(|k| d.at(k, l)).collect();
                    b.push(Instr::Select { dst, index: k_base, values });
                    dst
                })
                .collect();
            return Self { d, table_regs: None, dz, const_table: Vec::new() };
        }
        let folded = ConstTable::sign_folded(&d);
        let mut table = folded.values.clone();
        let zero_idx = folded.lookup.iter().any(Option::is_none).then(|| {
            table.push(0.0);
            table.len() - 1
        });
        let n = table.len() as i64;
        let regs = folded
            .lookup
            .iter()
            .map(|e| {
                e.map(|(idx, neg)| {
                    let dst = b.reg();
                    let mode = if neg { ConstMode::Negated } else { ConstMode::Plain };
                    b.push(Instr::LoadConst { dst, addr: Addr::fixed(idx as i64), mode });
                    dst
                })
            })
            .collect();
        let dz = (0..m)
            .map(|l| {
                let signed: Vec<i64> = (0..m)
                    .map(|k| match folded.lookup[k * m + l] {
                        Some((idx, neg)) => idx as i64 + if neg { n } else { 0 },
                        None => zero_idx.expect("zero entry is in the table") as i64,
                    })
                    .collect();
                let base = b.base(&format!("dz{l}"), IndexExpr::Lookup(signed, Box::new(IndexExpr::base(k_base))));
                let dst = b.reg();
                b.push(Instr::LoadConst { dst, addr: Addr::at(base, 0), mode: ConstMode::SignedIndex });
                dst
            })
            .collect();
        Self { d, table_regs: Some(regs), dz, const_table: table }
    }

    /// Coefficient `D[row][col]`, or `None` when it is zero.
    fn get(&self, row: usize, col: usize) -> Option<Operand> {
        let v = self.d.at(row, col);
        if v == 0.0 {
            return None;
        }
        Some(match &self.table_regs {
            Some(regs) => Operand::Reg(regs[row * self.d.m() + col].expect("nonzero entry has a register")),
            None => Operand::Imm(v),
        })
    }
}

struct Geometry {
    m: usize,
    n_s: usize,
    epw: usize,
    elements: usize,
}

fn geometry(cfg: &ElementConfig) -> Result<Geometry, CodegenError> {
    check_config(cfg)?;
    let m = cfg.m();
    if cfg.block_threads % WARP != 0 {
        return Err(CodegenError::Block {
            threads: cfg.block_threads,
            reason: "planar kernels need a whole number of warps".into(),
        });
    }
    let epw = WARP / m;
    Ok(Geometry { m, n_s: cfg.n_s(), epw, elements: cfg.block_threads / WARP * epw })
}

/// Thread indexing shared by both planar kernels. Returns the bases
/// `(k, element in block, global point base)`.
fn thread_bases(b: &mut Builder, g: &Geometry) -> (usize, usize, usize) {
    let lane = b.base("lane", IndexExpr::Tid.rem(WARP as i64));
    let warp = b.base("warp", IndexExpr::Tid.div(WARP as i64));
    let ew = b.base("e_w", IndexExpr::base(lane).div(g.m as i64));
    let k = b.base("k", IndexExpr::base(lane).rem(g.m as i64));
    let eb = b.base("e_b", IndexExpr::base(warp).mul(g.epw as i64).add(IndexExpr::base(ew)));
    let eg = b.base("e_g", IndexExpr::Bid.mul(g.elements as i64).add(IndexExpr::base(eb)));
    let w = SOA_WIDTH as i64;
    let gk = b.base(
        "g",
        IndexExpr::base(eg)
            .div(w)
            .mul(w * (g.n_s * NV) as i64)
            .add(IndexExpr::base(eg).rem(w))
            .add(IndexExpr::base(k).mul(w * (g.m * g.m) as i64)),
    );
    b.guards.push(Guard { base: lane, limit: Limit::Const((g.epw * g.m) as i64) });
    b.guards.push(Guard { base: eg, limit: Limit::ElementCount });
    (k, eb, gk)
}

/// Global word offset of variable `v` at `(x, y)` on the thread's own
/// z-index, relative to the `g` base.
fn goff(g: &Geometry, x: usize, y: usize, v: usize) -> i64 {
    (SOA_WIDTH * (x + y * g.m + g.n_s * v)) as i64
}

/// Store and broadcast-read pattern of one warp of planar threads, as
/// `(element, word offset)` per active lane.
fn planned_accesses(g: &Geometry) -> Vec<Vec<(usize, usize)>> {
    let m = g.m;
    let lanes = g.epw * m;
    let mut out = Vec::new();
    for v in 0..NV {
        for j in 0..m {
            out.push((0..lanes).map(|l| (l / m, (v * m + j) * m + l % m)).collect());
            if flux_inputs(2).contains(&v) {
                for c in 0..m {
                    out.push((0..lanes).map(|l| (l / m, (v * m + j) * m + c)).collect());
                }
            }
        }
    }
    out
}

fn vals_of(picked: &[(usize, Reg)]) -> [Reg; NV] {
    let mut vals = [Reg::MAX; NV];
    for &(v, r) in picked {
        vals[v] = r;
    }
    vals
}

/// Per-plane x and y contributions once the plane values `y[j][v]` are in
/// registers; `x_line(b, l, j)` yields the 13 values at `(l, j, k)`.
fn accumulate_xy(
    b: &mut Builder,
    co: &Coeffs,
    m: usize,
    i: usize,
    y: &[[Reg; NV]],
    mut x_line: impl FnMut(&mut Builder, usize, usize) -> Result<[Reg; NV], CodegenError>,
) -> Result<Vec<[Reg; NV]>, CodegenError> {
    let fy: Vec<_> = (0..m).map(|l| b.scaled_flux(1, &y[l])).collect();
    let mut accs = Vec::with_capacity(m);
    for j in 0..m {
        let acc: [Reg; NV] = std::array::from_fn(|_| b.zero());
        for l in 0..m {
            let vals = x_line(b, l, j)?;
            let Some(c) = co.get(i, l) else { continue };
            for (v, r) in b.scaled_flux(0, &vals) {
                b.acc_fma(acc[v], c, Operand::Reg(r));
            }
        }
        for (l, f) in fy.iter().enumerate() {
            let Some(c) = co.get(j, l) else { continue };
            for &(v, r) in f {
                b.acc_fma(acc[v], c, Operand::Reg(r));
            }
        }
        accs.push(acc);
    }
    Ok(accs)
}

/// z contribution, source and output store of point `(i, j, k)`;
/// `z_point(b, j, l, v)` loads `v` at `(i, j, l)` from shared.
fn finish_point(
    b: &mut Builder,
    co: &Coeffs,
    g: &Geometry,
    gk: usize,
    opts: &OptionSet,
    (i, j): (usize, usize),
    acc: &[Reg; NV],
    own: &[Reg; NV],
    mut z_point: impl FnMut(&mut Builder, usize, usize, usize) -> Reg,
) {
    for l in 0..g.m {
        let picked: Vec<_> = flux_inputs(2).iter().map(|&v| (v, z_point(b, j, l, v))).collect();
        for (v, r) in b.scaled_flux(2, &vals_of(&picked)) {
            b.acc_fma(acc[v], Operand::Reg(co.dz[l]), Operand::Reg(r));
        }
    }
    if opts.fuse_source {
        b.source(acc, own);
    }
    for (v, &r) in acc.iter().enumerate() {
        b.stg(r, Addr::at(gk, goff(g, i, j, v)));
    }
}

fn finish(
    b: Builder,
    cfg: &ElementConfig,
    method: Method,
    opts: &OptionSet,
    g: &Geometry,
    co: Coeffs,
    (shared_words, pad): (usize, usize),
) -> KernelIR {
    let name = match method {
        Method::PlanarManaged { .. } => format!("planar_managed_p{}_{}", cfg.p, cfg.precision),
        _ => format!("planar_p{}_{}", cfg.p, cfg.precision),
    };
    KernelIR {
        version: IR_VERSION,
        meta: KernelMeta {
            name,
            cfg: *cfg,
            method,
            opts: *opts,
            elements_per_block: g.elements,
            shared_words,
            shared_bytes: shared_words * cfg.precision.word_bytes(),
            const_table: co.const_table,
            shared_pad_words: pad,
        },
        n_regs: b.n_regs(),
        bases: b.bases,
        guards: b.guards,
        instrs: b.instrs,
    }
}

/// Fully unrolled kernel with one thread per x-y plane of an element; y-z
/// planes pass through shared memory one at a time.
pub fn generate_planar(cfg: &ElementConfig, opts: &OptionSet) -> Result<KernelIR, CodegenError> {
    opts.validate()?;
    let g = geometry(cfg)?;
    let m = g.m;
    let w = cfg.precision.word_bytes();
    let mut layout = ElementLayout::new(NV * m * m, g.elements, w);
    if opts.deconflict {
        layout = deconflict_layout(layout, &planned_accesses(&g), MAX_SHARED_BYTES)?;
    }
    if layout.total_bytes() > MAX_SHARED_BYTES {
        return Err(CodegenError::SharedTooSmall { needed: layout.total_bytes(), available: MAX_SHARED_BYTES });
    }
    let mut b = Builder::default();
    let (k, eb, gk) = thread_bases(&mut b, &g);
    let stride = layout.stride_words() as i64;
    let sh_e = b.base("s_e", IndexExpr::base(eb).mul(stride));
    let sh_own = b.base("s", IndexExpr::base(sh_e).add(IndexExpr::base(k)));
    let co = Coeffs::new(&mut b, OperatorMatrix::gauss_legendre(cfg.p).expect("valid order"), k, opts.cmem_constants);
    let soff = |v: usize, j: usize| ((v * m + j) * m) as i64;

    for i in 0..m {
        let mut y = vec![[0; NV]; m];
        for (j, yj) in y.iter_mut().enumerate() {
            for (v, slot) in yj.iter_mut().enumerate() {
                let r = b.ldg(Addr::at(gk, goff(&g, i, j, v)));
                b.sts(r, Addr::at(sh_own, soff(v, j)));
                *slot = if opts.explicit_grs { r } else { b.lds(Addr::at(sh_own, soff(v, j))) };
            }
        }
        let accs = accumulate_xy(&mut b, &co, m, i, &y, |b, l, j| {
            if opts.register_overlap && l == i {
                return Ok(y[j]);
            }
            Ok(std::array::from_fn(|v| b.ldg(Addr::at(gk, goff(&g, l, j, v)))))
        })?;
        b.barrier();
        for (j, acc) in accs.iter().enumerate() {
            finish_point(&mut b, &co, &g, gk, opts, (i, j), acc, &y[j], |b, j, l, v| {
                b.lds(Addr::at(sh_e, soff(v, j) + l as i64))
            });
        }
        if i + 1 < m {
            b.barrier();
        }
    }
    let words = layout.elements * layout.stride_words();
    Ok(finish(b, cfg, Method::PlanarUnmanaged, opts, &g, co, (words, layout.pad_words)))
}

/// Planar kernel whose operand placement comes from the generation-time
/// memory manager over `smem_bytes` of shared memory.
pub fn generate_planar_managed(
    cfg: &ElementConfig,
    opts: &OptionSet,
    smem_bytes: usize,
) -> Result<KernelIR, CodegenError> {
    generate_planar_managed_traced(cfg, opts, smem_bytes).map(|(ir, _)| ir)
}

/// As [`generate_planar_managed`], also returning the manager's log as JSON
/// lines.
pub fn generate_planar_managed_traced(
    cfg: &ElementConfig,
    opts: &OptionSet,
    smem_bytes: usize,
) -> Result<(KernelIR, String), CodegenError> {
    opts.validate()?;
    let g = geometry(cfg)?;
    let m = g.m;
    let t = cfg.block_threads;
    let w = cfg.precision.word_bytes();
    let min = planar_min_smem(cfg);
    if smem_bytes < min {
        return Err(CodegenError::SharedTooSmall { needed: min, available: smem_bytes });
    }
    if smem_bytes > MAX_SHARED_BYTES {
        return Err(CodegenError::SharedTooSmall { needed: smem_bytes, available: MAX_SHARED_BYTES });
    }
    let mut mgr = ManagerState::new(smem_bytes, t, w);
    let var = |v: usize, x: usize, y: usize| v + NV * (x + m * y);
    for id in 0..NV * m * m {
        mgr.declare_global(id);
    }

    let mut b = Builder::default();
    let (k, _, gk) = thread_bases(&mut b, &g);
    let own = b.base("s", IndexExpr::Tid);
    let line = b.base("s_z", IndexExpr::Tid.add(IndexExpr::base(k).mul(-1)));
    let co = Coeffs::new(&mut b, OperatorMatrix::gauss_legendre(cfg.p).expect("valid order"), k, opts.cmem_constants);
    let slot_addr = |slot: usize| Addr::at(own, (slot * t) as i64);

    // Value of a global variable that the manager has just cached.
    let cache = |b: &mut Builder, gaddr: Addr, slot: usize| {
        let r = b.ldg(gaddr);
        b.sts(r, slot_addr(slot));
        if opts.explicit_grs {
            r
        } else {
            b.lds(slot_addr(slot))
        }
    };

    for i in 0..m {
        let mut y = vec![[0; NV]; m];
        for (j, yj) in y.iter_mut().enumerate() {
            for (v, slot) in yj.iter_mut().enumerate() {
                let id = var(v, i, j);
                let resident = mgr.shared_slot(id).is_some();
                let loc = mgr.request_via(id, Priority::High, LineRegister::Y)?;
                if loc.space != Space::Shared {
                    return Err(CodegenError::SharedTooSmall { needed: min, available: smem_bytes });
                }
                *slot = if resident {
                    b.lds(slot_addr(loc.slot))
                } else {
                    cache(&mut b, Addr::at(gk, goff(&g, i, j, v)), loc.slot)
                };
            }
        }
        if opts.register_overlap {
            for (j, yj) in y.iter().enumerate() {
                for (v, &r) in yj.iter().enumerate() {
                    mgr.declare_register(var(v, i, j), r as usize);
                }
            }
        }
        let accs = accumulate_xy(&mut b, &co, m, i, &y, |b, l, j| {
            let mut vals = [0; NV];
            for (v, slot) in vals.iter_mut().enumerate() {
                let id = var(v, l, j);
                let resident = mgr.shared_slot(id).is_some();
                let loc = mgr.request(id, Priority::Low)?;
                let gaddr = Addr::at(gk, goff(&g, l, j, v));
                *slot = match loc.space {
                    Space::Register => loc.slot as Reg,
                    Space::Shared if resident => b.lds(slot_addr(loc.slot)),
                    Space::Shared => cache(b, gaddr, loc.slot),
                    _ => b.ldg(gaddr),
                };
            }
            Ok(vals)
        })?;
        b.barrier();
        for (j, acc) in accs.iter().enumerate() {
            let slots: Vec<usize> =
                (0..NV).map(|v| mgr.shared_slot(var(v, i, j)).expect("plane variables stay resident")).collect();
            finish_point(&mut b, &co, &g, gk, opts, (i, j), acc, &y[j], |b, _, l, v| {
                b.lds(Addr::at(line, (slots[v] * t + l) as i64))
            });
        }
        for j in 0..m {
            for v in 0..NV {
                let id = var(v, i, j);
                mgr.deescalate(id, Priority::Medium)?;
                mgr.declare_global(id);
            }
        }
        if i + 1 < m {
            b.barrier();
        }
    }
    let words = smem_bytes / w;
    let method = Method::PlanarManaged { smem_bytes };
    let trace = mgr.trace_jsonl();
    Ok((finish(b, cfg, method, opts, &g, co, (words, 0)), trace))
}
