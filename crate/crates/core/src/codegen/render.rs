use std::fmt::Write as _;

use super::ir::{Addr, ConstMode, IndexExpr, Instr, KernelIR, Limit, LoadHint, Operand, Param, StoreHint};
use super::options::Method;
use crate::fr::Precision;

fn literal(x: f64, precision: Precision) -> String {
    match precision {
        Precision::Fp32 => format!("{:.9e}f", x as f32),
        Precision::Fp64 => format!("{x:.17e}"),
    }
}

fn index_expr(e: &IndexExpr, names: &[String]) -> String {
    match e {
        IndexExpr::Tid => "tid".into(),
        IndexExpr::Bid => "bid".into(),
        IndexExpr::Const(c) => c.to_string(),
        IndexExpr::Base(b) => names[*b].clone(),
        IndexExpr::Add(a, b) => format!("({} + {})", index_expr(a, names), index_expr(b, names)),
        IndexExpr::Mul(a, c) => format!("({} * {c})", index_expr(a, names)),
        IndexExpr::Div(a, c) => format!("({} / {c})", index_expr(a, names)),
        IndexExpr::Mod(a, c) => format!("({} % {c})", index_expr(a, names)),
        IndexExpr::Lookup(table, idx) => {
            let idx = index_expr(idx, names);
            let mut s = String::new();
            for (n, v) in table.iter().enumerate() {
                if n + 1 == table.len() {
                    s.push_str(&v.to_string());
                } else {
                    let _ = write!(s, "{idx} == {n} ? {v} : ");
                }
            }
            format!("({s})")
        }
    }
}

struct Renderer<'a> {
    ir: &'a KernelIR,
    names: Vec<String>,
    out: String,
    depth: usize,
}

impl Renderer<'_> {
    fn line(&mut self, s: &str) {
        for _ in 0..self.depth {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn addr(&self, a: &Addr) -> String {
        let mut parts = Vec::new();
        if let Some(b) = a.base {
            parts.push(self.names[b].clone());
        }
        if a.offset != 0 || a.base.is_none() {
            parts.push(a.offset.to_string());
        }
        for &(id, c) in &a.loop_terms {
            parts.push(format!("{c} * L{id}"));
        }
        parts.join(" + ")
    }

    fn operand(&self, o: &Operand) -> String {
        match o {
            Operand::Reg(r) => format!("r{r}"),
            Operand::Imm(x) => literal(*x, self.ir.meta.cfg.precision),
            Operand::Param(p) => p.name().to_string(),
        }
    }

    fn instr(&mut self, ins: &Instr) {
        let fma = match self.ir.meta.cfg.precision {
            Precision::Fp32 => "fmaf",
            Precision::Fp64 => "fma",
        };
        let n_const = self.ir.meta.const_table.len();
        let s = match ins {
            Instr::LoadGlobal { dst, addr, hint } => match hint {
                LoadHint::Default => format!("if (active) r{dst} = u[{}];", self.addr(addr)),
                LoadHint::Lu => format!("if (active) r{dst} = __ldlu(&u[{}]);", self.addr(addr)),
            },
            Instr::StoreGlobal { src, addr, hint } => match hint {
                StoreHint::Default => format!("if (active) out[{}] = r{src};", self.addr(addr)),
                StoreHint::Wt => format!("if (active) __stwt(&out[{}], r{src});", self.addr(addr)),
            },
            Instr::LoadShared { dst, addr } => format!("if (active) r{dst} = smem[{}];", self.addr(addr)),
            Instr::StoreShared { src, addr } => format!("if (active) smem[{}] = r{src};", self.addr(addr)),
            Instr::LoadConst { dst, addr, mode } => {
                let a = self.addr(addr);
                match mode {
                    ConstMode::Plain => format!("r{dst} = cmem[{a}];"),
                    ConstMode::Negated => format!("r{dst} = -cmem[{a}];"),
                    ConstMode::SignedIndex => {
                        format!("r{dst} = ({a}) < {n_const} ? cmem[{a}] : -cmem[({a}) - {n_const}];")
                    }
                }
            }
            Instr::Select { dst, index, values } => {
                let idx = &self.names[*index];
                let p = self.ir.meta.cfg.precision;
                let mut s = String::new();
                for (n, v) in values.iter().enumerate() {
                    if n + 1 == values.len() {
                        s.push_str(&literal(*v, p));
                    } else {
                        let _ = write!(s, "{idx} == {n} ? {} : ", literal(*v, p));
                    }
                }
                format!("r{dst} = {s};")
            }
            Instr::Mov { dst, src } => format!("r{dst} = {};", self.operand(src)),
            Instr::Add { dst, a, b } => format!("r{dst} = {} + {};", self.operand(a), self.operand(b)),
            Instr::Mul { dst, a, b } => format!("r{dst} = {} * {};", self.operand(a), self.operand(b)),
            Instr::Neg { dst, a } => format!("r{dst} = -{};", self.operand(a)),
            Instr::Fma { dst, a, b, c } => {
                format!("r{dst} = {fma}({}, {}, {});", self.operand(a), self.operand(b), self.operand(c))
            }
            Instr::Barrier => "__syncthreads();".into(),
            Instr::LoopBegin { id, count } => {
                self.line(&format!("for (int L{id} = 0; L{id} < {count}; ++L{id}) {{"));
                self.depth += 1;
                return;
            }
            Instr::LoopEnd { .. } => {
                self.depth -= 1;
                "}".into()
            }
        };
        self.line(&s);
    }
}

/// CUDA-dialect source of a kernel; identical IR gives identical text.
pub fn render_source(ir: &KernelIR) -> String {
    let meta = &ir.meta;
    let ty = meta.cfg.precision.c_type();
    let names: Vec<String> = ir.bases.iter().map(|b| b.name.clone()).collect();
    let mut r = Renderer { ir, names, out: String::new(), depth: 0 };

    r.line(&format!(
        "// {}: p = {}, {} threads, {} elements per block, method {}",
        meta.name, meta.cfg.p, meta.cfg.block_threads, meta.elements_per_block, meta.method
    ));
    r.line("");
    if !meta.const_table.is_empty() {
        let vals: Vec<String> = meta.const_table.iter().map(|&x| literal(x, meta.cfg.precision)).collect();
        r.line(&format!("__constant__ {ty} cmem[{}] = {{{}}};", vals.len(), vals.join(", ")));
        r.line("");
    }
    let params: Vec<String> = [Param::Zeta, Param::NegNu, Param::NegInvT, Param::NegJac(0), Param::NegJac(1), Param::NegJac(2), Param::NegZetaT]
        .iter()
        .map(|p| format!("const {ty} {}", p.name()))
        .collect();
    r.line(&format!("extern \"C\" __global__ void __launch_bounds__({})", meta.cfg.block_threads));
    r.line(&format!(
        "{}(const int n_elem, const {ty}* __restrict__ u, {ty}* __restrict__ out, {})",
        meta.name,
        params.join(", ")
    ));
    r.line("{");
    r.depth = 1;
    match meta.method {
        Method::PlanarManaged { .. } => r.line(&format!("extern __shared__ {ty} smem[];")),
        _ if meta.shared_words > 0 => r.line(&format!("__shared__ {ty} smem[{}];", meta.shared_words)),
        _ => {}
    }
    r.line("const int tid = threadIdx.x;");
    r.line("const int bid = blockIdx.x;");
    for b in &ir.bases {
        let e = index_expr(&b.expr, &r.names);
        r.line(&format!("const int {} = {e};", b.name));
    }
    let guards: Vec<String> = ir
        .guards
        .iter()
        .map(|g| {
            let limit = match g.limit {
                Limit::Const(c) => c.to_string(),
                Limit::ElementCount => "n_elem".into(),
            };
            format!("{} < {limit}", r.names[g.base])
        })
        .collect();
    let active = if guards.is_empty() { "true".to_string() } else { guards.join(" && ") };
    r.line(&format!("const bool active = {active};"));
    for chunk in (0..ir.n_regs).collect::<Vec<_>>().chunks(16) {
        let regs: Vec<String> = chunk.iter().map(|x| format!("r{x}")).collect();
        r.line(&format!("{ty} {};", regs.join(", ")));
    }
    r.line("");
    for ins in &ir.instrs {
        r.instr(ins);
    }
    r.depth = 0;
    r.line("}");
    r.out
}
