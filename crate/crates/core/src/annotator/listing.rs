//! Contract-annotated program listing, parameterized by problem data.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::monitor::catalog::{self, format_number, ClauseParams, ContractSpec};
use crate::problem::SdpProblem;
use crate::scalar::Scalar;
use crate::solver::SolverOptions;
use crate::symvec::{packed_len, SymMatrix};

/// Surface syntax of the annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// `%@ requires ...;` comment lines.
    #[default]
    PseudoMatlab,
    /// `/*@ ensures ...; */` blocks.
    CLike,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::PseudoMatlab => "pseudo-matlab",
            Flavor::CLike => "c-like",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pseudo-matlab" => Ok(Flavor::PseudoMatlab),
            "c-like" => Ok(Flavor::CLike),
            other => Err(format!(
                "unknown flavor {other:?} (expected pseudo-matlab or c-like)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Requires,
    Ensures,
}

impl Keyword {
    fn as_str(self) -> &'static str {
        match self {
            Keyword::Requires => "requires",
            Keyword::Ensures => "ensures",
        }
    }
}

/// One placement of a contract in the listing. Lines are 1-based and
/// inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractLocation {
    pub first_line: usize,
    pub last_line: usize,
    pub keyword: Keyword,
    pub text: String,
    pub paper_anchor: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedListing {
    pub flavor: Flavor,
    pub lines: Vec<String>,
    /// Contract id to every placement of that contract.
    pub contract_index: BTreeMap<String, Vec<ContractLocation>>,
}

impl AnnotatedListing {
    /// Lines joined with `\n`, with a trailing newline.
    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    pub fn contract_ids(&self) -> Vec<&str> {
        self.contract_index.keys().map(String::as_str).collect()
    }
}

struct Builder {
    flavor: Flavor,
    params: ClauseParams,
    lines: Vec<String>,
    index: BTreeMap<String, Vec<ContractLocation>>,
    indent: usize,
}

impl Builder {
    fn pad(&self) -> String {
        "    ".repeat(self.indent)
    }

    fn code(&mut self, line: impl AsRef<str>) {
        let line = format!("{}{}", self.pad(), line.as_ref());
        self.lines.push(line);
    }

    fn block(&mut self, stmts: &[String]) {
        self.code("{");
        for s in stmts {
            self.code(format!("  {s}"));
        }
        self.code("}");
    }

    fn comment(&mut self, text: &str) {
        let line = match self.flavor {
            Flavor::PseudoMatlab => format!("% {text}"),
            Flavor::CLike => format!("/* {text} */"),
        };
        self.code(line);
    }

    fn rule(&mut self, name: &str, note: &str) {
        self.comment(&format!("rule: {name}; {note}"));
    }

    fn contract(&mut self, kw: Keyword, id: &str) {
        let spec = catalog::find(id).unwrap_or_else(|| panic!("{id} is not in the catalog"));
        let i = if spec.per_constraint() {
            constraint_index(spec, id)
        } else {
            None
        };
        self.place(kw, spec, id, i);
    }

    fn place(&mut self, kw: Keyword, spec: &'static ContractSpec, id: &str, i: Option<usize>) {
        let text = spec.render(&self.params, i);
        let line = match self.flavor {
            Flavor::PseudoMatlab => format!("%@ {} {};", kw.as_str(), text),
            Flavor::CLike => format!("/*@ {} {}; */", kw.as_str(), text),
        };
        self.code(line);
        let n = self.lines.len();
        self.index
            .entry(id.to_string())
            .or_default()
            .push(ContractLocation {
                first_line: n,
                last_line: n,
                keyword: kw,
                text,
                paper_anchor: spec.anchor,
            });
    }
}

fn constraint_index(spec: &ContractSpec, id: &str) -> Option<usize> {
    let (pre, post) = spec.id.split_once("{i}")?;
    id.strip_prefix(pre)?.strip_suffix(post)?.parse().ok()
}

fn matrix_literal<T: Scalar>(s: &SymMatrix<T>) -> String {
    let rows: Vec<String> = s
        .to_rows()
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| format_number(v.as_f64()))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect();
    format!("[{}]", rows.join("; "))
}

/// Emits the annotated listing for `prob`.
///
/// Output is a pure function of the problem data, the options that
/// appear in contracts and the flavor.
pub fn emit_annotated_listing<T: Scalar>(
    prob: &SdpProblem<T>,
    opts: &SolverOptions<T>,
    flavor: Flavor,
) -> AnnotatedListing {
    use Keyword::*;
    let params = ClauseParams {
        gap_ceiling: opts.gap_ceiling.as_f64(),
        sigma: opts.sigma.as_f64(),
    };
    let sigma = format_number(params.sigma);
    let mut b = Builder {
        flavor,
        params,
        lines: Vec::new(),
        index: BTreeMap::new(),
        indent: 0,
    };
    let m = prob.m();
    let n = prob.n();

    b.comment(&format!("annotated listing, n={n}, m={m}"));
    b.block(&[format!("F0={};", matrix_literal(prob.f0()))]);
    b.contract(Ensures, "init.F0_pd");
    for (i, fi) in prob.constraints().iter().enumerate() {
        b.block(&[format!("F{}={};", i + 1, matrix_literal(fi))]);
        b.contract(Ensures, &format!("init.F{}_sym", i + 1));
    }
    let bvals: Vec<String> = prob.b().iter().map(|v| format_number(v.as_f64())).collect();
    b.block(&[format!("b=[{}];", bvals.join("; "))]);
    let stacked: Vec<String> = (1..=m).map(|i| format!("vecs(F{i})")).collect();
    b.code(format!("F=[{}];", stacked.join("; ")));
    b.block(&["Ft=F';".to_string()]);
    b.block(&["n=length(F0);".to_string()]);
    b.contract(Ensures, "init.n");
    b.block(&["m=length(b);".to_string()]);
    b.contract(Ensures, "init.m");
    b.contract(Ensures, "init.b_size");

    b.block(&["Z=mats(lsqr(F,-b),n);".to_string()]);
    b.contract(Ensures, "init.dual_feasible");
    b.contract(Ensures, "init.Z_pd");
    let x0 = prob.x0().map_or_else(|| "X0".to_string(), matrix_literal);
    b.block(&[format!("X={x0};")]);
    b.contract(Ensures, "init.X_pd");
    b.contract(Ensures, "init.gap_positive");
    b.contract(Ensures, "init.gap_ceiling");
    b.block(&[format!("epsilon={};", format_number(opts.epsilon.as_f64()))]);
    b.contract(Ensures, "init.epsilon");
    b.block(&[format!("sigma={sigma};")]);
    b.contract(Ensures, "init.sigma");
    b.rule(
        "substitution",
        &format!("sigma replaced by {sigma} in later contracts"),
    );
    b.rule("skip", "X and Z unchanged since their postconditions");
    b.contract(Requires, "init.gap_positive");
    b.contract(Requires, "init.gap_ceiling");
    b.block(&["phi=trace(X*Z);".to_string()]);
    b.contract(Ensures, "init.phi");
    b.block(&[format!("phim=1/{sigma}*phi;")]);
    b.contract(Ensures, "init.phim");
    if m == packed_len(n) {
        b.block(&[
            "P=mats(lsqr(Ft,vecs(-X-F0)),n);".to_string(),
            "p=vecs(P);".to_string(),
        ]);
    } else {
        b.block(&["p=lsqr(Ft,vecs(-X-F0));".to_string()]);
    }
    b.contract(Ensures, "init.P_sym");
    b.contract(Ensures, "init.primal_feasible");
    b.block(&["mu=trace(X*Z)/n;".to_string()]);
    b.contract(Ensures, "init.mu");
    b.contract(Ensures, "init.central_path");

    b.rule(
        "consequence",
        "initialization postconditions imply the loop invariant",
    );
    b.contract(Requires, "I1");
    b.contract(Requires, "I2");
    b.contract(Requires, "I3");
    b.contract(Requires, "I4");
    b.code("while (phi>epsilon) {");
    b.indent = 1;
    for s in [
        "Xm=X;",
        "Zm=Z;",
        "pm=p;",
        "mu=trace(Xm*Zm)/n;",
        "Zh=Zm^(0.5);",
        "Zhi=Zh^(-1);",
        "G=krons(Zhi,Zh'*Xm,n,m);",
        "H=krons(Zhi*Zm,Zh',n,m);",
        "r=sigma*mu*eye(n,n)-Zh*Xm*Zh;",
    ] {
        b.code(s);
    }
    b.block(&["dZm=lsqr(F,zeros(m,1));".to_string()]);
    b.contract(Ensures, "I5");
    b.block(&["dXm=lsqr(H, vecs(r)-G*dZm);".to_string()]);
    b.contract(Ensures, "I10");
    b.contract(Ensures, "I6");
    b.contract(Ensures, "I7");
    b.block(&["dpm=lsqr(Ft,-dXm);".to_string()]);
    b.contract(Ensures, "I9");
    b.rule("composition", "update of p, X and Z");
    b.block(&[
        "p=pm+dpm;".to_string(),
        "X=Xm+mats(dXm,n);".to_string(),
        "Z=Zm+mats(dZm,n);".to_string(),
    ]);
    b.contract(Ensures, "I12");
    b.contract(Ensures, "I1");
    b.contract(Ensures, "I11");
    b.block(&[
        "phim=trace(Xm*Zm);".to_string(),
        "phi=trace(X*Z);".to_string(),
    ]);
    b.contract(Ensures, "I8");
    b.contract(Ensures, "I3");
    b.contract(Ensures, "I2");
    b.block(&["mu=trace(X*Z)/n;".to_string()]);
    b.contract(Ensures, "I4");
    b.rule("skip", "loop invariant holds at the end of the body");
    b.indent = 0;
    b.code("}");

    AnnotatedListing {
        flavor,
        lines: b.lines,
        contract_index: b.index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::running_example;

    fn listing(flavor: Flavor) -> AnnotatedListing {
        let prob = running_example::<f64>();
        let opts = SolverOptions::for_problem(&prob).unwrap();
        emit_annotated_listing(&prob, &opts, flavor)
    }

    #[test]
    fn index_matches_text() {
        for flavor in [Flavor::PseudoMatlab, Flavor::CLike] {
            let l = listing(flavor);
            for locs in l.contract_index.values() {
                for loc in locs {
                    assert!(l.lines[loc.first_line - 1].contains(&loc.text));
                }
            }
            let marker = match flavor {
                Flavor::PseudoMatlab => "%@ ",
                Flavor::CLike => "/*@ ",
            };
            let annotated = l.lines.iter().filter(|s| s.contains(marker)).count();
            let placed: usize = l.contract_index.values().map(Vec::len).sum();
            assert_eq!(annotated, placed);
        }
    }

    #[test]
    fn literal_contracts_present() {
        let text = listing(Flavor::PseudoMatlab).text();
        assert!(text.contains("ensures phi-0.76*phim<0"));
        assert!(text.contains("requires trace(X*Z)<=0.1;"));
        assert!(text.contains("F1=[-0.750999, 0.00499; 0.00499, 0.0001];"));
        assert!(text.contains("epsilon=1e-8;"));
        assert!(listing(Flavor::CLike).text().contains("/*@ ensures"));
    }

    #[test]
    fn flavor_parsing() {
        assert_eq!("c-like".parse::<Flavor>().unwrap(), Flavor::CLike);
        assert!("latex".parse::<Flavor>().is_err());
    }
}
