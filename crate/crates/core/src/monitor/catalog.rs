//! Contract catalog shared by the runtime monitor and the listing emitter.
//!
//! Clause text uses the annotation language of the reference listing.
//! Two placeholders are substituted at render time: `{c}` for the gap
//! ceiling and `{sigma}` for the reduction factor. `{i}` expands
//! per-constraint contracts.

/// Where in the program a contract is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContractSpec {
    pub id: &'static str,
    pub phase: Phase,
    pub clause: &'static str,
    pub anchor: &'static str,
    pub summary: &'static str,
}

impl ContractSpec {
    /// True for templates expanded once per constraint matrix.
    pub fn per_constraint(&self) -> bool {
        self.id.contains("{i}")
    }

    pub fn expand_id(&self, i: usize) -> String {
        self.id.replace("{i}", &i.to_string())
    }

    pub fn render(&self, params: &ClauseParams, i: Option<usize>) -> String {
        let mut s = self
            .clause
            .replace("{c}", &format_number(params.gap_ceiling))
            .replace("{sigma}", &format_number(params.sigma));
        if let Some(i) = i {
            s = s.replace("{i}", &i.to_string());
        }
        s
    }
}

/// Constants substituted into clause templates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClauseParams {
    pub gap_ceiling: f64,
    pub sigma: f64,
}

/// Shortest round-tripping decimal, switching to exponent form for very
/// small or large magnitudes.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e6).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub const INIT_CONTRACTS: &[ContractSpec] = &[
    ContractSpec {
        id: "init.F0_pd",
        phase: Phase::Init,
        clause: "F0>0",
        anchor: "annot:init1",
        summary: "F0 positive definite",
    },
    ContractSpec {
        id: "init.F{i}_sym",
        phase: Phase::Init,
        clause: "transpose(F{i})==F{i}",
        anchor: "annot:init1",
        summary: "constraint matrix symmetric",
    },
    ContractSpec {
        id: "init.b_size",
        phase: Phase::Init,
        clause: "length(b)==m",
        anchor: "annot:init1",
        summary: "one right-hand side entry per constraint",
    },
    ContractSpec {
        id: "init.n",
        phase: Phase::Init,
        clause: "n>=1",
        anchor: "annot:init1",
        summary: "matrix dimension",
    },
    ContractSpec {
        id: "init.m",
        phase: Phase::Init,
        clause: "m>=1",
        anchor: "annot:init1",
        summary: "constraint count",
    },
    ContractSpec {
        id: "init.dual_feasible",
        phase: Phase::Init,
        clause: "F*vecs(Z)==-b",
        anchor: "annot:init2",
        summary: "Z solves the dual equality constraints",
    },
    ContractSpec {
        id: "init.Z_pd",
        phase: Phase::Init,
        clause: "Z>0",
        anchor: "annot:init2",
        summary: "initial dual iterate positive definite",
    },
    ContractSpec {
        id: "init.X_pd",
        phase: Phase::Init,
        clause: "X>0",
        anchor: "annot:init2",
        summary: "initial primal slack positive definite",
    },
    ContractSpec {
        id: "init.epsilon",
        phase: Phase::Init,
        clause: "epsilon>0",
        anchor: "annot:init2",
        summary: "positive target gap",
    },
    ContractSpec {
        id: "init.sigma",
        phase: Phase::Init,
        clause: "sigma=={sigma}",
        anchor: "annot:init2",
        summary: "reduction factor below one",
    },
    ContractSpec {
        id: "init.gap_positive",
        phase: Phase::Init,
        clause: "trace(X*Z)>0",
        anchor: "annot:init2",
        summary: "initial gap positive",
    },
    ContractSpec {
        id: "init.gap_ceiling",
        phase: Phase::Init,
        clause: "trace(X*Z)<={c}",
        anchor: "annot:init2",
        summary: "initial gap below the ceiling",
    },
    ContractSpec {
        id: "init.phi",
        phase: Phase::Init,
        clause: "phi==trace(X*Z)",
        anchor: "annot:init2",
        summary: "phi holds the gap",
    },
    ContractSpec {
        id: "init.phim",
        phase: Phase::Init,
        clause: "phi-0.76*phim<0",
        anchor: "annot:init2",
        summary: "contraction invariant established",
    },
    ContractSpec {
        id: "init.P_sym",
        phase: Phase::Init,
        clause: "transpose(P)==P",
        anchor: "annot:init2",
        summary: "packed multiplier symmetric",
    },
    ContractSpec {
        id: "init.primal_feasible",
        phase: Phase::Init,
        clause: "F0+mats(Ft*p,n)+X==0",
        anchor: "annot:init2",
        summary: "p solves the primal equality constraints",
    },
    ContractSpec {
        id: "init.mu",
        phase: Phase::Init,
        clause: "mu==trace(X*Z)/n",
        anchor: "annot:init2",
        summary: "mu is the normalized gap",
    },
    ContractSpec {
        id: "init.central_path",
        phase: Phase::Init,
        clause: "norm(Z^(0.5)*X*Z^(0.5)-mu*eye(n),'fro')<=0.3105*mu",
        anchor: "central_path0",
        summary: "initial point in the central-path neighborhood",
    },
];

pub const LOOP_CONTRACTS: &[ContractSpec] = &[
    ContractSpec {
        id: "I1",
        phase: Phase::Loop,
        clause: "X>0 && Z>0",
        anchor: "annot:loop5",
        summary: "iterates stay in the cone interior",
    },
    ContractSpec {
        id: "I2",
        phase: Phase::Loop,
        clause: "phi>0 && phi<={c}",
        anchor: "annot:init2",
        summary: "gap positive and bounded",
    },
    ContractSpec {
        id: "I3",
        phase: Phase::Loop,
        clause: "phi-0.76*phim<0",
        anchor: "annot:init2",
        summary: "gap contracts",
    },
    ContractSpec {
        id: "I4",
        phase: Phase::Loop,
        clause: "norm(Z^(0.5)*X*Z^(0.5)-mu*eye(n),'fro')<=0.3105*mu",
        anchor: "central_path0",
        summary: "central-path neighborhood",
    },
    ContractSpec {
        id: "I5",
        phase: Phase::Loop,
        clause: "norm(Zhi*mats(dZm,n)*Zhi,'fro')<=0.7",
        anchor: "post01",
        summary: "scaled dual step bounded",
    },
    ContractSpec {
        id: "I6",
        phase: Phase::Loop,
        clause: "norm(Zhi*mats(dXm,n)*mats(dZm,n)*Zh,'fro')<=0.3105*{sigma}*mu",
        anchor: "post02",
        summary: "second-order term bounded",
    },
    ContractSpec {
        id: "I7",
        phase: Phase::Loop,
        clause: "trace(Xm*mats(dZm,n))+trace(mats(dXm,n)*Zm)+trace(Xm*Zm)-{sigma}*n*mu==0",
        anchor: "tauto:0",
        summary: "linearized gap identity",
    },
    ContractSpec {
        id: "I8",
        phase: Phase::Loop,
        clause: "trace(X*Z)-{sigma}*trace(Xm*Zm)==0",
        anchor: "strat7",
        summary: "exact gap contraction",
    },
    ContractSpec {
        id: "I9",
        phase: Phase::Loop,
        clause: "F*dZm==zeros(m,1) && mats(Ft*dpm,n)+mats(dXm,n)==0",
        anchor: "newton12",
        summary: "Newton equations, feasibility rows",
    },
    ContractSpec {
        id: "I10",
        phase: Phase::Loop,
        clause: "0.5*(Zhi*(mats(dZm,n)*Xm+Zm*mats(dXm,n))*Zh+Zh*(Xm*mats(dZm,n)+mats(dXm,n)*Zm)*Zhi)==r",
        anchor: "post03",
        summary: "Newton equation, symmetrized complementarity",
    },
    ContractSpec {
        id: "I11",
        phase: Phase::Loop,
        clause: "norm(Zh*X*Zh-{sigma}*mu*eye(n),'fro')<=0.5*norm(Zh*(X*Z-{sigma}*mu*eye(n))*Zhi+Zhi*(Z*X-{sigma}*mu*eye(n))*Zh,'fro') && 0.5*norm(Zh*(X*Z-{sigma}*mu*eye(n))*Zhi+Zhi*(Z*X-{sigma}*mu*eye(n))*Zh,'fro')<=0.3105*{sigma}*mu",
        anchor: "pre00",
        summary: "neighborhood chain after the step",
    },
    ContractSpec {
        id: "I12",
        phase: Phase::Loop,
        clause: "eye(n)+Zhi*mats(dZm,n)*Zhi>0 && Z>0",
        anchor: "cond01",
        summary: "step certificate for Z",
    },
];

/// Contract ids in evaluation order, with per-constraint templates
/// expanded for `m` constraints.
pub fn init_ids(m: usize) -> Vec<String> {
    let mut out = Vec::new();
    for spec in INIT_CONTRACTS {
        if spec.per_constraint() {
            out.extend((1..=m).map(|i| spec.expand_id(i)));
        } else {
            out.push(spec.id.to_string());
        }
    }
    out
}

pub fn loop_ids() -> Vec<String> {
    LOOP_CONTRACTS.iter().map(|s| s.id.to_string()).collect()
}

/// Looks up a spec by concrete id (`init.F2_sym` resolves to the template).
pub fn find(id: &str) -> Option<&'static ContractSpec> {
    INIT_CONTRACTS
        .iter()
        .chain(LOOP_CONTRACTS)
        .find(|s| s.id == id || (s.per_constraint() && template_matches(s.id, id)))
}

fn template_matches(template: &str, id: &str) -> bool {
    let (pre, post) = template.split_once("{i}").expect("template has {i}");
    id.strip_prefix(pre)
        .and_then(|rest| rest.strip_suffix(post))
        .is_some_and(|mid| !mid.is_empty() && mid.bytes().all(|b| b.is_ascii_digit()))
}

/// A pre- or post-condition of the reference annotated listing, mapped to
/// the contract that evaluates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ListingClause {
    pub figure: &'static str,
    pub label: &'static str,
    pub text: &'static str,
    pub contract: &'static str,
}

const fn clause(
    figure: &'static str,
    label: &'static str,
    text: &'static str,
    contract: &'static str,
) -> ListingClause {
    ListingClause {
        figure,
        label,
        text,
        contract,
    }
}

/// Every clause of the reference listing and the contract it maps to.
pub const LISTING_CLAUSES: &[ListingClause] = &[
    clause("annot:init1", "Q1,1", "F0>0", "init.F0_pd"),
    clause("annot:init1", "Q2,1", "transpose(F1)==F1", "init.F{i}_sym"),
    clause("annot:init1", "Q3,1", "transpose(F2)==F2", "init.F{i}_sym"),
    clause("annot:init1", "Q4,1", "transpose(F3)==F3", "init.F{i}_sym"),
    clause("annot:init1", "Q5,1", "length(b)==m", "init.b_size"),
    clause("annot:init1", "Q8,1", "n>=1", "init.n"),
    clause("annot:init1", "Q9,1", "m>=1", "init.m"),
    clause("annot:init2", "Q1,1", "Z>0", "init.Z_pd"),
    clause("annot:init2", "Q1,2", "F*vecs(Z)==-b", "init.dual_feasible"),
    clause("annot:init2", "Q2,1", "X>0", "init.X_pd"),
    clause("annot:init2", "Q2,2", "trace(X*Z)<=0.1", "init.gap_ceiling"),
    clause("annot:init2", "P3,1", "X>0 && Z>0", "I1"),
    clause("annot:init2", "Q3,1", "trace(X*Z)>0", "init.gap_positive"),
    clause("annot:init2", "Q4,1", "transpose(P)==P", "init.P_sym"),
    clause(
        "annot:init2",
        "Q4,2",
        "F0+mats(Ft*p,n)+X==0",
        "init.primal_feasible",
    ),
    clause("annot:init2", "Q5,1", "epsilon>0", "init.epsilon"),
    clause("annot:init2", "Q6,1", "sigma==0.75", "init.sigma"),
    clause("annot:init2", "Q7,1", "phi>0 && phi<=0.1", "I2"),
    clause("annot:init2", "Q7,2", "phi==trace(X*Z)", "init.phi"),
    clause("annot:init2", "Q9,1", "phi-0.76*phim<0", "init.phim"),
    clause("annot:init2", "Q10,1", "mu==trace(X*Z)/n", "init.mu"),
    clause(
        "annot:init2",
        "Q10,2",
        "norm(Z^(0.5)*X*Z^(0.5)-mu*eye(n),'fro')<=0.3105*mu",
        "init.central_path",
    ),
    clause("annot:loop0", "Q1,1", "phi>0 && phi<=0.1", "I2"),
    clause("annot:loop0", "Q1,2", "phi-0.76*phim<0", "I3"),
    clause("annot:loop0", "Q1,3", "X>0 && Z>0", "I1"),
    clause(
        "annot:loop2",
        "Q1,1",
        "trace(Xm*mats(dZm,n))+trace(mats(dXm,n)*Zm)+trace(Xm*Zm)-0.75*n*mu==0",
        "I7",
    ),
    clause("annot:loop2", "Q2,1", "F*dZm==zeros(m,1)", "I9"),
    clause(
        "annot:loop2",
        "Q3,1",
        "0.5*(Zhi*(mats(dZm,n)*Xm+Zm*mats(dXm,n))*Zh+Zh*(Xm*mats(dZm,n)+mats(dXm,n)*Zm)*Zhi)==r",
        "I10",
    ),
    clause("annot:loop3", "Q1,1", "mats(Ft*dpm,n)+mats(dXm,n)==0", "I9"),
    clause(
        "annot:loop4",
        "Q1,1",
        "trace(X*Z)-0.75*trace(Xm*Zm)==0",
        "I8",
    ),
    clause("annot:loop4", "Q2,1", "phi-0.76*phim<0", "I3"),
    clause("annot:loop4", "Q2,2", "phi>0 && phi<=0.1", "I2"),
    clause("annot:loop5", "Q1,1", "X>0 && Z>0", "I1"),
    clause(
        "annot:loop5",
        "Q2,1",
        "norm(Z^(0.5)*X*Z^(0.5)-mu*eye(n),'fro')<=0.3105*mu",
        "I4",
    ),
    clause(
        "annot:loop7",
        "Q1,1",
        "norm(Zhi*mats(dZm,n)*Zhi,'fro')<=0.7",
        "I5",
    ),
    clause(
        "annot:loop7",
        "Q1,2",
        "norm(Zhi*mats(dXm,n)*mats(dZm,n)*Zh,'fro')<=0.3105*0.75*mu",
        "I6",
    ),
    clause(
        "annot:loop7",
        "Q4,1",
        "eye(n)+Zhi*mats(dZm,n)*Zhi>0 && Z>0",
        "I12",
    ),
    clause(
        "annot:loop8",
        "Q2,1",
        "norm(Zh*X*Zh-0.75*mu*eye(n),'fro')<=0.3105*0.75*mu",
        "I11",
    ),
];
