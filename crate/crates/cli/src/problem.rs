//! Problem files: a TOML document describing a group, optional algebra,
//! action and character, and a task.

use std::fmt;
use std::sync::Arc;

use kummerwitt::algebra::{AlgebraAction, FiniteAlgebra, FiniteGroup, Subgroup};
use kummerwitt::cohomology::Character;
use kummerwitt::linalg::{Modulus, ResidueMatrix};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Cohomology,
    CyclotomicCheck,
    CyclothymicSearch,
    Fit,
    Lift,
    SmoothCheck,
    Laurent,
    KummerIdentity,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Cohomology => "cohomology",
            Task::CyclotomicCheck => "cyclotomic-check",
            Task::CyclothymicSearch => "cyclothymic-search",
            Task::Fit => "fit",
            Task::Lift => "lift",
            Task::SmoothCheck => "smooth-check",
            Task::Laurent => "laurent",
            Task::KummerIdentity => "kummer-identity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub task: Option<Task>,
    pub group: GroupSpec,
    pub algebra: Option<AlgebraSpec>,
    pub action: Option<ActionSpec>,
    pub character: Option<CharacterSpec>,
    pub module: Option<ModuleSpec>,
    #[serde(default)]
    pub params: Params,
    /// Subgroup classes for `cyclothymic-search`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<SubgroupClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    Cyclic { n: usize },
    /// Multiplication table on `0..n`; row `a`, column `b` holds `a * b`.
    Table { rows: Vec<Vec<usize>> },
    Product { factors: Vec<GroupSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraSpec {
    PrimeField { p: u64 },
    /// `F_p[x]/(poly)`, coefficients from the constant term up.
    FiniteField { p: u64, poly: Vec<u64> },
    TruncatedPoly { p: u64, k: usize },
    Product { factors: Vec<AlgebraSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpec {
    Trivial,
    /// A generator acting by `Frob^power`.
    Frobenius {
        element: usize,
        #[serde(default = "one")]
        power: u32,
    },
    /// Generator images; row `i` of `matrix` is the image of basis vector `i`.
    Matrices { images: Vec<MatrixImage> },
    /// On a product of identical factors, a generator moves factor `i` to
    /// `permutation[i]` after `Frob^powers[i]`.
    Factors { images: Vec<FactorImage> },
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixImage {
    pub element: usize,
    pub matrix: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorImage {
    pub element: usize,
    pub permutation: Vec<usize>,
    pub powers: Vec<u32>,
}

/// A character `G -> (Z/p^exponent)^*`, by full table or generator values.
/// With neither, the character is trivial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterSpec {
    pub p: u64,
    pub exponent: u32,
    pub values: Option<Vec<u64>>,
    pub generators: Option<Vec<GeneratorValue>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorValue {
    pub element: usize,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModuleSpec {
    /// `Z/p^a(chi^power)` over the character's modulus.
    Twist {
        a: u32,
        #[serde(default = "one_i64")]
        power: i64,
    },
    /// `W_r(A)(chi^power)`.
    Witt {
        r: usize,
        #[serde(default = "one_i64")]
        power: i64,
    },
}

fn one_i64() -> i64 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Cohomological degree.
    pub n: Option<usize>,
    /// Depth for `cyclothymic-search`.
    pub e: Option<u32>,
    /// Witt length for `lift`.
    pub r: Option<usize>,
    /// Level for `laurent`.
    pub k: Option<u32>,
    /// Class coordinates; all classes when absent.
    pub class: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupClass {
    pub subgroup: Vec<usize>,
    pub class: Vec<u64>,
}

/// A malformed problem, located by line or by field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputError {
    pub field: String,
    pub message: String,
}

impl InputError {
    pub fn new(field: impl Into<String>, message: impl ToString) -> Self {
        InputError {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for InputError {}

pub fn parse(text: &str) -> Result<ProblemSpec, InputError> {
    toml::from_str(text).map_err(|e| InputError::new("", e.to_string().trim_end()))
}

fn build_group(spec: &GroupSpec, field: &str) -> Result<FiniteGroup, InputError> {
    match spec {
        GroupSpec::Cyclic { n } => {
            if *n == 0 {
                return Err(InputError::new(format!("{field}.n"), "cyclic group order must be positive"));
            }
            Ok(FiniteGroup::cyclic(*n))
        }
        GroupSpec::Table { rows } => {
            FiniteGroup::from_table(rows).map_err(|e| InputError::new(format!("{field}.rows"), e))
        }
        GroupSpec::Product { factors } => {
            if factors.is_empty() {
                return Err(InputError::new(format!("{field}.factors"), "empty product"));
            }
            let mut g = FiniteGroup::trivial();
            for (i, f) in factors.iter().enumerate() {
                g = g.direct_product(&build_group(f, &format!("{field}.factors[{i}]"))?);
            }
            Ok(g)
        }
    }
}

fn build_algebra(spec: &AlgebraSpec, field: &str) -> Result<FiniteAlgebra, InputError> {
    let err = |e: kummerwitt::algebra::AlgebraError| InputError::new(field, e);
    match spec {
        AlgebraSpec::PrimeField { p } => FiniteAlgebra::prime_field(*p).map_err(err),
        AlgebraSpec::FiniteField { p, poly } => FiniteAlgebra::finite_field(*p, poly).map_err(err),
        AlgebraSpec::TruncatedPoly { p, k } => FiniteAlgebra::truncated_poly(*p, *k).map_err(err),
        AlgebraSpec::Product { factors } => {
            let built = algebra_factors(factors, field)?;
            FiniteAlgebra::product(&built).map_err(err)
        }
    }
}

fn algebra_factors(factors: &[AlgebraSpec], field: &str) -> Result<Vec<FiniteAlgebra>, InputError> {
    factors
        .iter()
        .enumerate()
        .map(|(i, f)| build_algebra(f, &format!("{field}.factors[{i}]")))
        .collect()
}

/// The validated objects of a problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub task: Task,
    pub group: Arc<FiniteGroup>,
}

impl Problem {
    pub fn new(spec: ProblemSpec, task_override: Option<Task>) -> Result<Self, InputError> {
        let task = task_override
            .or(spec.task)
            .ok_or_else(|| InputError::new("task", "no task given in the file or on the command line"))?;
        let group = Arc::new(build_group(&spec.group, "group")?);
        Ok(Problem { spec, task, group })
    }

    pub fn algebra(&self) -> Result<FiniteAlgebra, InputError> {
        let spec = self
            .spec
            .algebra
            .as_ref()
            .ok_or_else(|| InputError::new("algebra", format!("required by task {}", self.task.name())))?;
        build_algebra(spec, "algebra")
    }

    pub fn action(&self, alg: &FiniteAlgebra) -> Result<AlgebraAction, InputError> {
        let spec = self.spec.action.as_ref().unwrap_or(&ActionSpec::Trivial);
        let group = self.group.clone();
        let check_element = |field: String, g: usize| {
            if g >= group.order() {
                Err(InputError::new(field, format!("element {g} outside group of order {}", group.order())))
            } else {
                Ok(g)
            }
        };
        let gens: Vec<(usize, ResidueMatrix)> = match spec {
            ActionSpec::Trivial => return Ok(AlgebraAction::trivial(group, alg)),
            ActionSpec::Frobenius { element, power } => {
                let g = check_element("action.element".into(), *element)?;
                vec![(g, alg.frobenius_power_matrix(*power))]
            }
            ActionSpec::Matrices { images } => images
                .iter()
                .enumerate()
                .map(|(i, im)| {
                    let field = format!("action.images[{i}]");
                    let g = check_element(format!("{field}.element"), im.element)?;
                    let md = Modulus::prime_power(alg.p(), 1).map_err(|e| InputError::new(&field, e))?;
                    if im.matrix.len() != alg.dim() {
                        return Err(InputError::new(
                            format!("{field}.matrix"),
                            format!("expected {} rows, found {}", alg.dim(), im.matrix.len()),
                        ));
                    }
                    let m = ResidueMatrix::from_rows(md, alg.dim(), &im.matrix)
                        .map_err(|e| InputError::new(format!("{field}.matrix"), e))?;
                    Ok((g, m))
                })
                .collect::<Result<_, _>>()?,
            ActionSpec::Factors { images } => {
                let Some(AlgebraSpec::Product { factors }) = &self.spec.algebra else {
                    return Err(InputError::new("action.kind", "factor actions need a product algebra"));
                };
                let built = algebra_factors(factors, "algebra")?;
                images
                    .iter()
                    .enumerate()
                    .map(|(i, im)| {
                        let field = format!("action.images[{i}]");
                        let g = check_element(format!("{field}.element"), im.element)?;
                        let m = AlgebraAction::factor_matrix(&built, &im.permutation, &im.powers)
                            .map_err(|e| InputError::new(&field, e))?;
                        Ok((g, m))
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        AlgebraAction::from_generators(group, alg, &gens).map_err(|e| InputError::new("action", e))
    }

    pub fn character(&self) -> Result<Character, InputError> {
        let spec = self
            .spec
            .character
            .as_ref()
            .ok_or_else(|| InputError::new("character", format!("required by task {}", self.task.name())))?;
        let md = Modulus::prime_power(spec.p, spec.exponent).map_err(|e| InputError::new("character", e))?;
        match (&spec.values, &spec.generators) {
            (Some(_), Some(_)) => Err(InputError::new("character", "give either values or generators, not both")),
            (Some(values), None) => Character::new(self.group.clone(), md, values.clone())
                .map_err(|e| InputError::new("character.values", e)),
            (None, Some(gens)) => {
                let pairs: Vec<(usize, u64)> = gens.iter().map(|g| (g.element, g.value)).collect();
                if let Some(g) = pairs.iter().find(|(g, _)| *g >= self.group.order()) {
                    return Err(InputError::new(
                        "character.generators",
                        format!("element {} outside group of order {}", g.0, self.group.order()),
                    ));
                }
                Character::from_generators(self.group.clone(), md, &pairs)
                    .map_err(|e| InputError::new("character.generators", e))
            }
            (None, None) => Ok(Character::trivial(self.group.clone(), md)),
        }
    }

    pub fn subgroup(&self, elements: &[usize], field: &str) -> Result<Subgroup, InputError> {
        if let Some(g) = elements.iter().find(|&&g| g >= self.group.order()) {
            return Err(InputError::new(field, format!("element {g} outside the group")));
        }
        self.group.subgroup(elements).map_err(|e| InputError::new(field, e))
    }
}
