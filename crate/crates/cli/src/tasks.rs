//! Dispatch from a validated problem to the library.

use std::fmt;

use kummerwitt::algebra::{AlgebraError, FiniteAlgebra};
use kummerwitt::cohomology::{
    cohomology, is_cocycle, wittmod_from_algebra, Character, Cochain, CohomologyError, CohomologyGroup,
    CohomologyOptions, GModule,
};
use kummerwitt::extensions::{BorelMatrix, ExtensionError, DEFAULT_ENUMERATION_BOUND};
use kummerwitt::kummer::{
    cyclothymic_witness, fit_factorization, is_cyclotomic_pair_bounded, kummer_identity_check, kummer_instances,
    laurent_model, lift_with_context, smooth_instance_check, witt_to_integer, CyclotomicData, CyclothymicInput,
    KummerError, LiftContext, DEFAULT_GROUP_BOUND,
};
use kummerwitt::linalg::{Modulus, ResidueMatrix};
use kummerwitt::witt::{truncate, WittRing, WittVector};
use serde_json::{json, Value};

use crate::problem::{InputError, ModuleSpec, Problem, Task};
use crate::report::Report;

const DEFAULT_LAURENT_BOUND: usize = 512;
const DEFAULT_KUMMER_GROUP_BOUND: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunError {
    Input(InputError),
    Bound(String),
    Failed(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Input(e) => write!(f, "input error: {e}"),
            RunError::Bound(m) => write!(f, "bound exceeded: {m}"),
            RunError::Failed(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<InputError> for RunError {
    fn from(e: InputError) -> Self {
        RunError::Input(e)
    }
}

fn is_bound_cohomology(e: &CohomologyError) -> bool {
    matches!(
        e,
        CohomologyError::SizeBound { .. } | CohomologyError::Algebra(AlgebraError::BoundExceeded { .. })
    )
}

impl From<CohomologyError> for RunError {
    fn from(e: CohomologyError) -> Self {
        if is_bound_cohomology(&e) {
            RunError::Bound(e.to_string())
        } else {
            RunError::Failed(e.to_string())
        }
    }
}

impl From<ExtensionError> for RunError {
    fn from(e: ExtensionError) -> Self {
        match e {
            ExtensionError::Cohomology(c) => c.into(),
            ExtensionError::BoundExceeded { .. } | ExtensionError::GroupTooLarge { .. } => {
                RunError::Bound(e.to_string())
            }
            other => RunError::Failed(other.to_string()),
        }
    }
}

impl From<KummerError> for RunError {
    fn from(e: KummerError) -> Self {
        match e {
            KummerError::Cohomology(c) => c.into(),
            KummerError::Extension(x) => x.into(),
            KummerError::BoundExceeded { .. } | KummerError::Algebra(AlgebraError::BoundExceeded { .. }) => {
                RunError::Bound(e.to_string())
            }
            KummerError::InvalidData(m) => RunError::Input(InputError::new("", m)),
            other => RunError::Failed(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub bound: Option<usize>,
}

pub fn run(problem: &Problem, opts: &RunOptions) -> Result<Report, RunError> {
    match problem.task {
        Task::Cohomology => run_cohomology(problem, opts),
        Task::CyclotomicCheck => run_cyclotomic(problem, opts),
        Task::CyclothymicSearch => run_cyclothymic(problem),
        Task::Fit => run_fit(problem),
        Task::Lift => run_lift(problem, opts),
        Task::SmoothCheck => run_smooth(problem, opts),
        Task::Laurent => run_laurent(problem, opts),
        Task::KummerIdentity => run_kummer(problem, opts),
    }
}

fn big(x: u128) -> Value {
    u64::try_from(x).map_or_else(|_| json!(x.to_string()), |v| json!(v))
}

pub fn cochain_json(m: &GModule, c: &Cochain) -> Value {
    json!(c.values.iter().map(|v| m.canonical(v)).collect::<Vec<_>>())
}

fn matrix_json(m: &ResidueMatrix) -> Value {
    json!(m.row_vecs())
}

fn report(problem: &Problem, verdict: bool, summary: Vec<String>, result: Value) -> Report {
    Report {
        task: problem.task.name().to_string(),
        verdict,
        summary,
        result,
    }
}

/// Checks that `coords` are valid class coordinates.
fn check_class(h: &CohomologyGroup, coords: &[u64]) -> Result<(), InputError> {
    let orders = h.orders();
    if coords.len() != orders.len() || coords.iter().zip(orders).any(|(c, o)| c >= o) {
        return Err(InputError::new(
            "params.class",
            format!("expected coordinates below {orders:?}, found {coords:?}"),
        ));
    }
    Ok(())
}

fn degree(problem: &Problem) -> usize {
    problem.spec.params.n.unwrap_or(1)
}

fn module_of(problem: &Problem, chi: &Character) -> Result<GModule, RunError> {
    let md = chi.modulus();
    let spec = problem.spec.module.clone().unwrap_or(ModuleSpec::Twist {
        a: md.exponent(),
        power: 1,
    });
    Ok(match spec {
        ModuleSpec::Twist { a, power } => {
            if a == 0 || a > md.exponent() {
                return Err(InputError::new("module.a", format!("must lie in 1..={}", md.exponent())).into());
            }
            GModule::cyclic_twist(problem.group.clone(), md, a, chi, power)?
        }
        ModuleSpec::Witt { r, power } => {
            let alg = problem.algebra()?;
            let action = problem.action(&alg)?;
            if r == 0 || r > md.exponent() as usize {
                return Err(InputError::new("module.r", format!("must lie in 1..={}", md.exponent())).into());
            }
            if alg.p() != md.p() {
                return Err(InputError::new("module", "algebra and character have different primes").into());
            }
            wittmod_from_algebra(&alg, &action, r, chi, power)?.module
        }
    })
}

fn run_cohomology(problem: &Problem, opts: &RunOptions) -> Result<Report, RunError> {
    let chi = problem.character()?;
    let m = module_of(problem, &chi)?;
    let n = degree(problem);
    let mut options = CohomologyOptions {
        max_degree: n.max(2),
        ..Default::default()
    };
    if let Some(b) = opts.bound {
        options.max_cochain_dim = b;
    }
    let h = CohomologyGroup::with_options(&m, n, options)?;
    let generators: Vec<Value> = h.generators().iter().map(|c| cochain_json(&m, c)).collect();
    let mut result = json!({
        "degree": n,
        "module": {
            "rank": m.rank(),
            "invariants": m.invariants().factors(),
            "order": big(m.order()),
        },
        "invariants": h.orders(),
        "order": big(h.order()),
        "generators": generators,
    });
    if let Some(coords) = &problem.spec.params.class {
        check_class(&h, coords)?;
        let rep = h.representative(coords);
        if !is_cocycle(&m, &rep) || h.class_of(&rep)? != *coords {
            return Err(RunError::Failed("representative does not re-validate".into()));
        }
        result["class"] = json!({ "coords": coords, "representative": cochain_json(&m, &rep) });
    }
    let summary = vec![
        format!("module invariants {:?}", m.invariants().factors()),
        format!("H^{n} has order {} with invariants {:?}", h.order(), h.orders()),
    ];
    Ok(report(problem, true, summary, result))
}

fn cyclotomic_data(problem: &Problem) -> Result<CyclotomicData, RunError> {
    let chi = problem.character()?;
    if chi.modulus().exponent() < 2 {
        return Err(InputError::new("character.exponent", "a lift needs modulus p^(e+1) with e >= 1").into());
    }
    Ok(CyclotomicData::new(chi, degree(problem))?)
}

fn run_cyclotomic(problem: &Problem, opts: &RunOptions) -> Result<Report, RunError> {
    let data = cyclotomic_data(problem)?;
    let rep = is_cyclotomic_pair_bounded(&data, opts.bound.unwrap_or(DEFAULT_GROUP_BOUND))?;
    let subgroups: Vec<Value> = rep
        .subgroups
        .iter()
        .map(|s| {
            json!({
                "subgroup": s.subgroup,
                "source_order": big(s.source_order),
                "target_order": big(s.target_order),
                "image_order": big(s.image_order),
                "surjective": s.surjective,
                "witness": s.witness,
            })
        })
        .collect();
    let mut summary = vec![format!(
        "p = {}, e = {}, n = {}: {} subgroups checked",
        data.p,
        data.e,
        data.n,
        rep.subgroups.len()
    )];
    for s in &rep.subgroups {
        summary.push(format!(
            "  H = {:?}: image {} of {}{}",
            s.subgroup,
            s.image_order,
            s.target_order,
            s.witness.as_ref().map(|w| format!(", misses class {w:?}")).unwrap_or_default()
        ));
    }
    let result = json!({
        "p": data.p,
        "e": data.e,
        "n": data.n,
        "cyclotomic": rep.cyclotomic,
        "subgroups": subgroups,
    });
    Ok(report(problem, rep.cyclotomic, summary, result))
}

fn run_cyclothymic(problem: &Problem) -> Result<Report, RunError> {
    let lambda = problem.character()?;
    let n = degree(problem);
    let e = problem.spec.params.e.unwrap_or(1);
    if e == 0 {
        return Err(InputError::new("params.e", "must be positive").into());
    }
    let p = lambda.modulus().p();
    let md = Modulus::prime_power(p, e + 1).map_err(|err| InputError::new("params.e", err))?;
    let lambda1 = lambda.reduce(1);
    let mut inputs = Vec::new();
    // F_p(lambda) over Z/p^{1+e} does not depend on the chosen lift.
    let lift = Character::all(problem.group.clone(), md)
        .into_iter()
        .find(|psi| psi.reduce(1) == lambda1);
    for (i, sc) in problem.spec.classes.iter().enumerate() {
        let field = format!("classes[{i}]");
        let sub = problem.subgroup(&sc.subgroup, &format!("{field}.subgroup"))?;
        let Some(lift) = &lift else { break };
        let small = GModule::cyclic_twist(problem.group.clone(), md, 1, lift, 1)?.restrict(&sub);
        let h = cohomology(&small, n)?;
        check_class(&h, &sc.class).map_err(|e| InputError::new(format!("{field}.class"), e.message))?;
        inputs.push(CyclothymicInput {
            subgroup: sub,
            class: h.representative(&sc.class),
        });
    }
    let witness = if lift.is_some() {
        cyclothymic_witness(&lambda, n, e, &inputs)?
    } else {
        None
    };
    let summary = vec![match &witness {
        Some(psi) => format!("lifting character found: {:?}", psi.values()),
        None => "no lifting character".to_string(),
    }];
    let result = json!({
        "n": n,
        "e": e,
        "witness": witness.as_ref().map(|psi| psi.values().to_vec()),
    });
    Ok(report(problem, witness.is_some(), summary, result))
}

fn run_fit(problem: &Problem) -> Result<Report, RunError> {
    let alg = problem.algebra()?;
    let action = problem.action(&alg)?;
    let fit = fit_factorization(&alg, &action)?;
    let verified = fit.verify(&alg, &action);
    let (k, m_nil) = alg.nilpotency_data();
    let summary = vec![
        format!("m = {}, |X| = {}", fit.m, fit.set.size()),
        format!("g . f = Frob^{} and equivariance: {}", fit.m, if verified { "verified" } else { "FAILED" }),
    ];
    let result = json!({
        "m": fit.m,
        "nilpotency_index": k,
        "nilpotency_exponent": m_nil,
        "set_size": fit.set.size(),
        "permutations": fit.set.permutations(),
        "points": fit.points,
        "f": matrix_json(&fit.f),
        "g": matrix_json(&fit.g),
        "verified": verified,
    });
    Ok(report(problem, verified, summary, result))
}

fn run_lift(problem: &Problem, opts: &RunOptions) -> Result<Report, RunError> {
    let data = cyclotomic_data(problem)?;
    if data.n != 1 {
        return Err(InputError::new("params.n", "lifting is implemented in degree 1").into());
    }
    let alg = problem.algebra()?;
    let action = problem.action(&alg)?;
    if alg.p() != data.p {
        return Err(InputError::new("algebra", "algebra and character have different primes").into());
    }
    let r = problem.spec.params.r.unwrap_or(1);
    if r == 0 || r > data.e as usize {
        return Err(InputError::new("params.r", format!("must lie in 1..={}", data.e)).into());
    }
    let ctx = match LiftContext::new(&data, &alg, &action) {
        Ok(ctx) => ctx,
        Err(KummerError::NotCyclotomic { subgroup, class }) => {
            let summary = vec![format!("not cyclotomic: subgroup {subgroup:?} misses class {class:?}")];
            let result = json!({
                "cyclotomic": false,
                "failure": { "subgroup": subgroup, "class": class },
                "lifts": [],
            });
            return Ok(report(problem, false, summary, result));
        }
        Err(e) => return Err(e.into()),
    };
    let wr = ctx.level(r);
    let top = ctx.level(data.e as usize + 1);
    let h = cohomology(&wr.module, 1)?;
    let classes = match &problem.spec.params.class {
        Some(c) => {
            check_class(&h, c)?;
            vec![c.clone()]
        }
        None => {
            let count = h.order();
            if let Some(b) = opts.bound {
                if count > b as u128 {
                    return Err(RunError::Bound(format!("{count} classes exceed bound {b}")));
                }
            }
            h.all_classes()
        }
    };
    let mut lifts = Vec::new();
    let mut all_ok = true;
    let mut worst = 0;
    for coords in &classes {
        let c = h.representative(coords);
        let rep = lift_with_context(&ctx, r, &c)?;
        let valid = is_cocycle(&top.module, &rep.lift) && ctx.verify(r, &c, rep.m, &rep.lift)?;
        let ok = valid && rep.m <= rep.bound;
        all_ok &= ok;
        worst = worst.max(rep.m);
        lifts.push(json!({
            "class": coords,
            "m": rep.m,
            "constructive_m": rep.constructive_m,
            "bound": rep.bound,
            "lift": cochain_json(&top.module, &rep.lift),
            "lift_class": rep.lift_coords,
            "valid": valid,
        }));
    }
    let summary = vec![
        format!("H^1(G, W_{r}(A)(1)) has {} classes; lifted to W_{}", h.order(), data.e + 1),
        format!("largest Frobenius exponent used: {worst}; all lifts re-validated: {all_ok}"),
    ];
    let result = json!({
        "cyclotomic": true,
        "r": r,
        "frobenius_exponent": ctx.frobenius_exponent(),
        "lifts": lifts,
    });
    Ok(report(problem, all_ok, summary, result))
}

fn witt_json(ring: &WittRing<FiniteAlgebra>, w: &WittVector<Vec<u64>>) -> Value {
    let mut v = json!({ "components": w.components });
    if ring.base().dim() == 1 {
        v["integer"] = json!(witt_to_integer(ring, w));
    }
    v
}

fn borel_json<E, F: Fn(&E) -> Value>(z: &[BorelMatrix<E>], f: F) -> Value {
    json!(z.iter().map(|m| json!([[f(&m.a), f(&m.b)], ["0", f(&m.d)]])).collect::<Vec<_>>())
}

fn run_smooth(problem: &Problem, opts: &RunOptions) -> Result<Report, RunError> {
    let alg = problem.algebra()?;
    let action = problem.action(&alg)?;
    let red = smooth_instance_check(&problem.group, &alg, &action, opts.bound.unwrap_or(DEFAULT_ENUMERATION_BOUND))?;
    let w2 = WittRing::new(alg.clone(), 2).map_err(CohomologyError::from)?;
    let reduce = |m: &BorelMatrix<WittVector<Vec<u64>>>| BorelMatrix {
        a: truncate(&m.a, 1).expect("length 2").components[0].clone(),
        b: truncate(&m.b, 1).expect("length 2").components[0].clone(),
        d: truncate(&m.d, 1).expect("length 2").components[0].clone(),
    };
    let witnesses: Vec<Value> = red
        .witnesses
        .iter()
        .zip(&red.target_representatives)
        .map(|(w, target)| match w {
            None => json!({ "target": borel_json(target, |x| json!(x)), "lift": null }),
            Some(z) => {
                let reduced: Vec<_> = z.iter().map(reduce).collect();
                json!({
                    "target": borel_json(target, |x| json!(x)),
                    "lift": borel_json(z, |x| witt_json(&w2, x)),
                    "reduces_to_target": reduced == *target,
                })
            }
        })
        .collect();
    let summary = vec![format!(
        "H^1(G, B(W_2(A))) has {} classes, H^1(G, B(A)) has {}; onto: {}",
        red.source_classes, red.target_classes, red.surjective
    )];
    let result = json!({
        "surjective": red.surjective,
        "source_classes": red.source_classes,
        "target_classes": red.target_classes,
        "witnesses": witnesses,
    });
    Ok(report(problem, red.surjective, summary, result))
}

fn run_laurent(problem: &Problem, opts: &RunOptions) -> Result<Report, RunError> {
    let data = cyclotomic_data(problem)?;
    let k = problem.spec.params.k.unwrap_or(data.e + 1);
    if k == 0 || k > data.e + 1 {
        return Err(InputError::new("params.k", format!("must lie in 1..={}", data.e + 1)).into());
    }
    let model = laurent_model(&data, k, opts.bound.unwrap_or(DEFAULT_LAURENT_BOUND))?;
    let valid = is_cocycle(&model.coefficients, &model.t);
    let h = cohomology(&model.coefficients, 1)?;
    let t_class = h.class_of(&model.t)?;
    let nonzero = !h.is_zero_class(&t_class);
    let summary = vec![
        format!("G((t)) has order {}", model.group.order()),
        format!("(t) is a cocycle: {valid}; class {t_class:?} in H^1 of order {}", h.order()),
    ];
    let result = json!({
        "level": k,
        "order": model.group.order(),
        "table": model.group.table_rows(),
        "projection": model.projection,
        "t": cochain_json(&model.coefficients, &model.t),
        "t_is_cocycle": valid,
        "h1_invariants": h.orders(),
        "t_class": t_class,
    });
    Ok(report(problem, valid && nonzero, summary, result))
}

fn run_kummer(problem: &Problem, opts: &RunOptions) -> Result<Report, RunError> {
    let bound = opts.bound.unwrap_or(DEFAULT_KUMMER_GROUP_BOUND);
    if problem.group.order() > bound {
        return Err(RunError::Bound(format!(
            "group of order {} exceeds bound {bound}",
            problem.group.order()
        )));
    }
    let mut holds = true;
    let mut rows = Vec::new();
    for (chi, e1, ext) in kummer_instances(&problem.group)? {
        let id = kummer_identity_check(&e1, &chi, &ext)?;
        holds &= id.holds;
        rows.push(json!({
            "chi": chi.values(),
            "e1": e1,
            "square": id.square,
            "twisted": id.twisted,
            "holds": id.holds,
        }));
    }
    let summary = vec![format!("{} instances; identity holds on all: {holds}", rows.len())];
    Ok(report(problem, holds, summary, json!({ "instances": rows })))
}
