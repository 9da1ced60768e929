//! Line-oriented problem documents.
//!
//! ```text
//! # comments start with '#'
//! variables = 2
//! objective = x1 + x2
//! constraint.expr = x1^2 + x2^2 - 2
//! constraint.set = orthant-
//! start = [-1, -1]
//! M = 3
//! rho0 = 1
//! ```
//!
//! Each `constraint.expr` opens a constraint block closed by its
//! `constraint.set`; the expression is either bare (one scalar component)
//! or a JSON-style array of quoted expressions for vector constraints.
//! Set descriptors use the kind tags `orthant-`, `zeros`, `box`, `ball`,
//! `sphere`, `finite`, `lorentz`, `product`, `union`:
//!
//! ```text
//! orthant-            # dimension inferred from the component count
//! zeros(2)            # explicit dimension
//! box([-1, -1], [1, 1])
//! ball([0, 0], 1.5)
//! sphere([0], 1)
//! finite([-1], [1])
//! lorentz(3)
//! product(orthant-(2); zeros(1))
//! union(ball([-2], 0.5); ball([2], 0.5))
//! ```

use penopt::model::{FuncModel, Problem};
use penopt::sets::ClosedSet;

use crate::expr::{parse_expr, to_func_model, Expr, ParseError};

/// The parsed document, kept in a renderable form.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub variables: usize,
    pub objective: Expr,
    pub constraints: Vec<ConstraintSpec>,
    pub start: Option<Vec<f64>>,
    pub lower_bound: Option<f64>,
    pub rho0: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    pub exprs: Vec<Expr>,
    pub set: SetDescriptor,
}

/// A set descriptor as written in the document; dimensions may be left
/// implicit at the top level and are resolved against the component count.
#[derive(Debug, Clone, PartialEq)]
pub enum SetDescriptor {
    Orthant(Option<usize>),
    Zeros(Option<usize>),
    Lorentz(Option<usize>),
    Box(Vec<f64>, Vec<f64>),
    Ball(Vec<f64>, f64),
    Sphere(Vec<f64>, f64),
    Finite(Vec<Vec<f64>>),
    Product(Vec<SetDescriptor>),
    Union(Vec<SetDescriptor>),
}

impl SetDescriptor {
    /// Dimension when determined by the descriptor itself.
    fn explicit_dim(&self) -> Option<usize> {
        match self {
            SetDescriptor::Orthant(d) | SetDescriptor::Zeros(d) | SetDescriptor::Lorentz(d) => *d,
            SetDescriptor::Box(l, _) => Some(l.len()),
            SetDescriptor::Ball(c, _) | SetDescriptor::Sphere(c, _) => Some(c.len()),
            SetDescriptor::Finite(points) => Some(points[0].len()),
            SetDescriptor::Product(members) => {
                members.iter().map(|m| m.explicit_dim()).sum::<Option<usize>>()
            }
            SetDescriptor::Union(members) => members.first().and_then(|m| m.explicit_dim()),
        }
    }

    /// Builds the set, inferring implicit dimensions from `dim`.
    fn build(&self, dim: usize) -> Result<ClosedSet, String> {
        if let Some(d) = self.explicit_dim() {
            if d != dim {
                return Err(format!(
                    "set descriptor has dimension {d} but the constraint has {dim} components"
                ));
            }
        }
        let set = match self {
            SetDescriptor::Orthant(_) => ClosedSet::nonpositive_orthant(dim),
            SetDescriptor::Zeros(_) => ClosedSet::zeros(dim),
            SetDescriptor::Lorentz(_) => ClosedSet::lorentz(dim),
            SetDescriptor::Box(l, u) => {
                ClosedSet::box_set(l.clone(), u.clone()).map_err(|e| e.to_string())?
            }
            SetDescriptor::Ball(c, r) => {
                ClosedSet::ball(c.clone(), *r).map_err(|e| e.to_string())?
            }
            SetDescriptor::Sphere(c, r) => {
                ClosedSet::sphere(c.clone(), *r).map_err(|e| e.to_string())?
            }
            SetDescriptor::Finite(points) => {
                ClosedSet::finite(points.clone()).map_err(|e| e.to_string())?
            }
            SetDescriptor::Product(members) => {
                let mut built = Vec::with_capacity(members.len());
                for m in members {
                    let d = m
                        .explicit_dim()
                        .ok_or("product members need explicit dimensions")?;
                    built.push(m.build(d)?);
                }
                ClosedSet::product(built).map_err(|e| e.to_string())?
            }
            SetDescriptor::Union(members) => {
                let mut built = Vec::with_capacity(members.len());
                for m in members {
                    let d = match m.explicit_dim() {
                        Some(d) => d,
                        None => dim,
                    };
                    built.push(m.build(d)?);
                }
                ClosedSet::union(built).map_err(|e| e.to_string())?
            }
        };
        Ok(set)
    }

    fn render(&self) -> String {
        match self {
            SetDescriptor::Orthant(None) => "orthant-".into(),
            SetDescriptor::Orthant(Some(d)) => format!("orthant-({d})"),
            SetDescriptor::Zeros(None) => "zeros".into(),
            SetDescriptor::Zeros(Some(d)) => format!("zeros({d})"),
            SetDescriptor::Lorentz(None) => "lorentz".into(),
            SetDescriptor::Lorentz(Some(d)) => format!("lorentz({d})"),
            SetDescriptor::Box(l, u) => {
                format!("box({}, {})", render_vec(l), render_vec(u))
            }
            SetDescriptor::Ball(c, r) => format!("ball({}, {r})", render_vec(c)),
            SetDescriptor::Sphere(c, r) => format!("sphere({}, {r})", render_vec(c)),
            SetDescriptor::Finite(points) => {
                let inner: Vec<String> = points.iter().map(|p| render_vec(p)).collect();
                format!("finite({})", inner.join(", "))
            }
            SetDescriptor::Product(members) => {
                let inner: Vec<String> = members.iter().map(|m| m.render()).collect();
                format!("product({})", inner.join("; "))
            }
            SetDescriptor::Union(members) => {
                let inner: Vec<String> = members.iter().map(|m| m.render()).collect();
                format!("union({})", inner.join("; "))
            }
        }
    }
}

fn render_vec(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", inner.join(", "))
}

impl ProblemFile {
    /// Parses a problem document; errors carry 1-based line/column.
    pub fn parse(text: &str) -> Result<ProblemFile, ParseError> {
        let mut variables: Option<usize> = None;
        let mut objective: Option<Expr> = None;
        let mut constraints: Vec<ConstraintSpec> = Vec::new();
        let mut pending_exprs: Option<(Vec<Expr>, usize)> = None;
        let mut start: Option<Vec<f64>> = None;
        let mut lower_bound: Option<f64> = None;
        let mut rho0: Option<f64> = None;

        for (line_idx, raw) in text.lines().enumerate() {
            let line_no = line_idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            let eq = line.find('=').ok_or_else(|| ParseError {
                line: line_no,
                col: 1,
                msg: "expected `key = value`".into(),
            })?;
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            let value_col = eq + 2 + (line[eq + 1..].len() - line[eq + 1..].trim_start().len());
            let err = |msg: String| ParseError {
                line: line_no,
                col: value_col,
                msg,
            };

            match key {
                "variables" => {
                    let n: usize = value
                        .parse()
                        .map_err(|_| err(format!("bad variable count `{value}`")))?;
                    if n == 0 {
                        return Err(err("variable count must be positive".into()));
                    }
                    variables = Some(n);
                }
                "objective" => {
                    let e = parse_expr(value).map_err(|e| e.offset(line_no, value_col - 1))?;
                    objective = Some(e);
                }
                "constraint.expr" => {
                    if pending_exprs.is_some() {
                        return Err(err(
                            "previous constraint is missing its `constraint.set`".into(),
                        ));
                    }
                    let exprs = if value.starts_with('[') {
                        parse_string_array(value)
                            .map_err(&err)?
                            .iter()
                            .map(|s| parse_expr(s).map_err(|e| e.offset(line_no, value_col - 1)))
                            .collect::<Result<Vec<_>, _>>()?
                    } else {
                        vec![parse_expr(value).map_err(|e| e.offset(line_no, value_col - 1))?]
                    };
                    pending_exprs = Some((exprs, line_no));
                }
                "constraint.set" => {
                    let (exprs, _) = pending_exprs.take().ok_or_else(|| {
                        err("`constraint.set` without a preceding `constraint.expr`".into())
                    })?;
                    let set = parse_set_descriptor(value).map_err(&err)?;
                    constraints.push(ConstraintSpec { exprs, set });
                }
                "start" => {
                    start = Some(parse_number_array(value).map_err(&err)?);
                }
                "M" => {
                    let m: f64 = value.parse().map_err(|_| err(format!("bad number `{value}`")))?;
                    lower_bound = Some(m);
                }
                "rho0" => {
                    let r: f64 = value.parse().map_err(|_| err(format!("bad number `{value}`")))?;
                    rho0 = Some(r);
                }
                other => {
                    return Err(ParseError {
                        line: line_no,
                        col: 1,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }

        if let Some((_, line)) = pending_exprs {
            return Err(ParseError {
                line,
                col: 1,
                msg: "constraint is missing its `constraint.set`".into(),
            });
        }
        let variables = variables.ok_or(ParseError {
            line: 1,
            col: 1,
            msg: "missing `variables = ...`".into(),
        })?;
        let objective = objective.ok_or(ParseError {
            line: 1,
            col: 1,
            msg: "missing `objective = ...`".into(),
        })?;
        Ok(ProblemFile {
            variables,
            objective,
            constraints,
            start,
            lower_bound,
            rho0,
        })
    }

    /// Builds and validates the core problem.
    pub fn to_problem(&self) -> Result<Problem, ParseError> {
        let n = self.variables;
        let fail = |msg: String| ParseError {
            line: 1,
            col: 1,
            msg,
        };
        let objective = to_func_model(&self.objective, n)?;
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for spec in &self.constraints {
            let dim = spec.exprs.len();
            let set = spec.set.build(dim).map_err(&fail)?;
            let model = if dim == 1 {
                to_func_model(&spec.exprs[0], n)?
            } else {
                let parts = spec
                    .exprs
                    .iter()
                    .map(|e| to_func_model(e, n))
                    .collect::<Result<Vec<_>, _>>()?;
                FuncModel::stack(parts).map_err(|e| fail(e.to_string()))?
            };
            constraints.push((model, set));
        }
        let mut problem = Problem::new(objective, constraints).map_err(|e| fail(e.to_string()))?;
        if let Some(x0) = &self.start {
            if x0.len() != n {
                return Err(fail(format!(
                    "start has {} entries but the problem has {n} variables",
                    x0.len()
                )));
            }
            problem = problem.with_start(x0.clone()).map_err(|e| fail(e.to_string()))?;
        }
        if let Some(m) = self.lower_bound {
            problem = problem.with_lower_bound(m).map_err(|e| fail(e.to_string()))?;
        }
        if let Some(r) = self.rho0 {
            problem = problem.with_rho0(r).map_err(|e| fail(e.to_string()))?;
        }
        Ok(problem)
    }

    /// Renders the document back to text; `parse(render(p))` evaluates
    /// identically to `p`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("variables = {}\n", self.variables));
        out.push_str(&format!("objective = {}\n", self.objective));
        for c in &self.constraints {
            if c.exprs.len() == 1 {
                out.push_str(&format!("constraint.expr = {}\n", c.exprs[0]));
            } else {
                let quoted: Vec<String> =
                    c.exprs.iter().map(|e| format!("\"{e}\"")).collect();
                out.push_str(&format!("constraint.expr = [{}]\n", quoted.join(", ")));
            }
            out.push_str(&format!("constraint.set = {}\n", c.set.render()));
        }
        if let Some(s) = &self.start {
            out.push_str(&format!("start = {}\n", render_vec(s)));
        }
        if let Some(m) = self.lower_bound {
            out.push_str(&format!("M = {m}\n"));
        }
        if let Some(r) = self.rho0 {
            out.push_str(&format!("rho0 = {r}\n"));
        }
        out
    }
}

/// Parses `[a, b, c]` with plain (possibly signed) numbers.
fn parse_number_array(src: &str) -> Result<Vec<f64>, String> {
    let inner = src
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected `[ ... ]`, got `{src}`"))?;
    let trimmed = inner.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{}`", p.trim()))
        })
        .collect()
}

/// Parses `["expr", "expr"]`.
fn parse_string_array(src: &str) -> Result<Vec<String>, String> {
    let inner = src
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected `[ ... ]`, got `{src}`"))?;
    let mut out = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        rest = rest
            .strip_prefix('"')
            .ok_or_else(|| "array entries must be double-quoted expressions".to_string())?;
        let end = rest
            .find('"')
            .ok_or_else(|| "unterminated string in array".to_string())?;
        out.push(rest[..end].to_string());
        rest = rest[end + 1..].trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        } else if !rest.is_empty() {
            return Err("expected `,` between array entries".to_string());
        }
    }
    if out.is_empty() {
        return Err("constraint needs at least one expression".to_string());
    }
    Ok(out)
}

/// Parses a set descriptor.
pub fn parse_set_descriptor(src: &str) -> Result<SetDescriptor, String> {
    let src = src.trim();
    let (tag, args) = match src.find('(') {
        None => (src, None),
        Some(p) => {
            let inner = src[p + 1..]
                .strip_suffix(')')
                .ok_or_else(|| format!("missing `)` in set descriptor `{src}`"))?;
            (&src[..p], Some(inner))
        }
    };
    match (tag, args) {
        ("orthant-", None) => Ok(SetDescriptor::Orthant(None)),
        ("orthant-", Some(a)) => Ok(SetDescriptor::Orthant(Some(parse_dim(a)?))),
        ("zeros", None) => Ok(SetDescriptor::Zeros(None)),
        ("zeros", Some(a)) => Ok(SetDescriptor::Zeros(Some(parse_dim(a)?))),
        ("lorentz", None) => Ok(SetDescriptor::Lorentz(None)),
        ("lorentz", Some(a)) => Ok(SetDescriptor::Lorentz(Some(parse_dim(a)?))),
        ("box", Some(a)) => {
            let parts = split_top_level(a, ',')?;
            if parts.len() != 2 {
                return Err("box needs two arguments: box([l...], [u...])".into());
            }
            Ok(SetDescriptor::Box(
                parse_number_array(&parts[0])?,
                parse_number_array(&parts[1])?,
            ))
        }
        ("ball", Some(a)) | ("sphere", Some(a)) => {
            let parts = split_top_level(a, ',')?;
            if parts.len() != 2 {
                return Err(format!("{tag} needs two arguments: {tag}([c...], r)"));
            }
            let center = parse_number_array(&parts[0])?;
            let radius: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| format!("bad radius `{}`", parts[1].trim()))?;
            if tag == "ball" {
                Ok(SetDescriptor::Ball(center, radius))
            } else {
                Ok(SetDescriptor::Sphere(center, radius))
            }
        }
        ("finite", Some(a)) => {
            let parts = split_top_level(a, ',')?;
            let points = parts
                .iter()
                .map(|p| parse_number_array(p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SetDescriptor::Finite(points))
        }
        ("product", Some(a)) | ("union", Some(a)) => {
            let parts = split_top_level(a, ';')?;
            let members = parts
                .iter()
                .map(|p| parse_set_descriptor(p))
                .collect::<Result<Vec<_>, _>>()?;
            if tag == "product" {
                Ok(SetDescriptor::Product(members))
            } else {
                Ok(SetDescriptor::Union(members))
            }
        }
        _ => Err(format!("unknown set descriptor `{src}`")),
    }
}

fn parse_dim(s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("bad dimension `{}`", s.trim()))
}

/// Splits on `sep` outside brackets/parens.
fn split_top_level(src: &str, sep: char) -> Result<Vec<String>, String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in src.chars() {
        match c {
            '[' | '(' => {
                depth += 1;
                current.push(c);
            }
            ']' | ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err("unbalanced brackets".into());
                }
                current.push(c);
            }
            c if c == sep && depth == 0 => {
                parts.push(current.trim().to_string());
                current = String::new();
            }
            c => current.push(c),
        }
    }
    if depth != 0 {
        return Err("unbalanced brackets".into());
    }
    parts.push(current.trim().to_string());
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONIC: &str = "\
# the two-variable conic test problem
variables = 2
objective = x1 + x2
constraint.expr = x1^2 + x2^2 - 2
constraint.set = orthant-
start = [-1, -1]
M = 3
rho0 = 1
";

    #[test]
    fn parses_the_conic_document() {
        let pf = ProblemFile::parse(CONIC).unwrap();
        assert_eq!(pf.variables, 2);
        assert_eq!(pf.constraints.len(), 1);
        assert_eq!(pf.start, Some(vec![-1.0, -1.0]));
        assert_eq!(pf.lower_bound, Some(3.0));
        let p = pf.to_problem().unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.feasibility(&[-1.0, -1.0]).unwrap(), 0.0);
    }

    #[test]
    fn parses_the_1d_benchmark() {
        let text = "variables = 1\nobjective = x1\nconstraint.expr = 1 - x1\nconstraint.set = orthant-\nstart = [1]\nM = 0\nrho0 = 1\n";
        let pf = ProblemFile::parse(text).unwrap();
        let p = pf.to_problem().unwrap();
        assert_eq!(p.rho0, 1.0);
        assert_eq!(p.constraint_value(&[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn parses_max_objective() {
        let text = "variables = 1\nobjective = max(x1, 0 - x1)\n";
        let p = ProblemFile::parse(text).unwrap().to_problem().unwrap();
        assert_eq!(p.objective.value_scalar(&[-2.0]).unwrap(), 2.0);
    }

    #[test]
    fn vector_constraints_and_products() {
        let text = "variables = 3\nobjective = x1\nconstraint.expr = [\"x1 - 1\", \"x2 + x3\"]\nconstraint.set = product(orthant-(1); zeros(1))\n";
        let pf = ProblemFile::parse(text).unwrap();
        let p = pf.to_problem().unwrap();
        assert_eq!(p.constraint_dim(), 2);
        assert_eq!(
            p.constraint_value(&[2.0, 1.0, -1.0]).unwrap(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn descriptor_forms() {
        assert_eq!(
            parse_set_descriptor("orthant-").unwrap(),
            SetDescriptor::Orthant(None)
        );
        assert_eq!(
            parse_set_descriptor("zeros(2)").unwrap(),
            SetDescriptor::Zeros(Some(2))
        );
        assert!(matches!(
            parse_set_descriptor("box([-1, -1], [1, 1])").unwrap(),
            SetDescriptor::Box(_, _)
        ));
        assert!(matches!(
            parse_set_descriptor("union(ball([-2], 0.5); ball([2], 0.5))").unwrap(),
            SetDescriptor::Union(_)
        ));
        assert!(parse_set_descriptor("simplex").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "variables = 2\nobjective = x1 + $\n";
        let e = ProblemFile::parse(text).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.col > 12, "col = {}", e.col);

        let text = "variables = 2\nobjective = x1\nconstraint.expr = x1\n";
        let e = ProblemFile::parse(text).unwrap_err();
        assert_eq!(e.line, 3);

        let text = "variables = 2\nobjective = x1\nbogus = 3\n";
        let e = ProblemFile::parse(text).unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn infeasible_start_is_a_validation_error() {
        let text = "variables = 1\nobjective = x1\nconstraint.expr = 1 - x1\nconstraint.set = orthant-\nstart = [0]\n";
        let pf = ProblemFile::parse(text).unwrap();
        assert!(pf.to_problem().is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = "variables = 2\nobjective = x1\nconstraint.expr = x1\nconstraint.set = zeros(3)\n";
        let pf = ProblemFile::parse(text).unwrap();
        assert!(pf.to_problem().is_err());
    }

    #[test]
    fn render_round_trips_evaluations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let docs = [
            CONIC,
            "variables = 1\nobjective = max(x1, 0 - x1)\nconstraint.expr = x1 - 2\nconstraint.set = orthant-\n",
            "variables = 3\nobjective = x1^2 + x2^2 + x3^2\nconstraint.expr = [\"x1 - 1\", \"x2\"]\nconstraint.set = product(orthant-(1); zeros(1))\nstart = [1, 0, 0]\n",
        ];
        for doc in docs {
            let p1 = ProblemFile::parse(doc).unwrap();
            let rendered = p1.render();
            let p2 = ProblemFile::parse(&rendered)
                .unwrap_or_else(|e| panic!("reparse failed: {e}\n{rendered}"));
            let m1 = p1.to_problem().unwrap();
            let m2 = p2.to_problem().unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..m1.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
                assert_eq!(
                    m1.objective.value_scalar(&x).unwrap(),
                    m2.objective.value_scalar(&x).unwrap()
                );
                assert_eq!(
                    m1.constraint_value(&x).unwrap(),
                    m2.constraint_value(&x).unwrap()
                );
            }
        }
    }
}
