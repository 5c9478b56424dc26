//! Named-object session files.
//!
//! A session file is a JSON document holding reusable definitions and,
//! optionally, tool configuration:
//!
//! ```json
//! {
//!   "config":      { "quad_rule": "simpson" },
//!   "exprs":       { "spike2": { "op": "mul", "args": [...] } },
//!   "testfns":     { "g0": { "kind": "bump", "center": 0.0, "halfwidth": 1.0 } },
//!   "functionals": { "ddelta": { "rep": { "op": "dirac" }, "deriv_order": 1 } }
//! }
//! ```
//!
//! Labels must be unique across all three binding maps. CLI arguments that
//! accept an expression or test function resolve `@name` against the
//! session, built-in shorthands (`dirac`, `var`, `bump`, `bump:c,h`,
//! `corpus:i`), a `file:path.json` reference, or inline JSON.

use crate::cli::ToolConfig;
use crate::json::{ExprJson, FunctionalJson, SchemaError, TestFnJson};
use hyperdist_core::expr::make_dirac_with;
use hyperdist_core::testfn::default_corpus;
use hyperdist_core::{InternalExpr, TestFn, TruncationPolicy};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Reusable named definitions loaded from a `--session` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    /// Configuration baseline; `--config` files and flags override it.
    #[serde(default)]
    pub config: Option<ToolConfig>,
    #[serde(default)]
    pub exprs: BTreeMap<String, ExprJson>,
    #[serde(default)]
    pub testfns: BTreeMap<String, TestFnJson>,
    #[serde(default)]
    pub functionals: BTreeMap<String, FunctionalJson>,
}

impl Session {
    /// Read and deserialize a session file; labels must not repeat across
    /// the expression, test-function, and functional namespaces.
    pub fn load(path: &Path) -> Result<Session, SchemaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError(format!("cannot read session file {}: {e}", path.display())))?;
        let session: Session = serde_json::from_str(&text)
            .map_err(|e| SchemaError(format!("session file {}: {e}", path.display())))?;
        session.check_labels()?;
        Ok(session)
    }

    fn check_labels(&self) -> Result<(), SchemaError> {
        let mut seen = BTreeMap::new();
        for (name, kind) in self
            .exprs
            .keys()
            .map(|k| (k, "expression"))
            .chain(self.testfns.keys().map(|k| (k, "test function")))
            .chain(self.functionals.keys().map(|k| (k, "functional")))
        {
            if let Some(first) = seen.insert(name.clone(), kind) {
                return Err(SchemaError(format!(
                    "label {name:?} bound twice (as {first} and as {kind})"
                )));
            }
        }
        Ok(())
    }
}

fn read_file(path: &str) -> Result<String, SchemaError> {
    std::fs::read_to_string(path).map_err(|e| SchemaError(format!("cannot read {path}: {e}")))
}

/// Resolve an expression argument: `@name`, a shorthand, `file:path`, or
/// inline JSON.
pub fn resolve_expr(
    input: &str,
    session: Option<&Session>,
    policy: TruncationPolicy,
) -> Result<InternalExpr, SchemaError> {
    let input = input.trim();
    if let Some(name) = input.strip_prefix('@') {
        let json = session
            .and_then(|s| s.exprs.get(name))
            .ok_or_else(|| SchemaError(format!("no session expression named {name:?}")))?;
        return json.to_expr(policy);
    }
    match input {
        "dirac" => return Ok(make_dirac_with(policy)),
        "var" | "x" => return Ok(InternalExpr::var()),
        "bump" => return Ok(InternalExpr::Bump),
        _ => {}
    }
    let text = match input.strip_prefix("file:") {
        Some(path) => read_file(path)?,
        None => input.into(),
    };
    let json: ExprJson = serde_json::from_str(&text)
        .map_err(|e| SchemaError(format!("expression argument: {e}")))?;
    json.to_expr(policy)
}

/// Resolve a test-function argument: `@name`, `corpus:i`, `bump:c,h`,
/// `file:path`, or inline JSON.
pub fn resolve_testfn(input: &str, session: Option<&Session>) -> Result<TestFn, SchemaError> {
    let input = input.trim();
    if let Some(name) = input.strip_prefix('@') {
        let json = session
            .and_then(|s| s.testfns.get(name))
            .ok_or_else(|| SchemaError(format!("no session test function named {name:?}")))?;
        return json.to_testfn();
    }
    if let Some(index) = input.strip_prefix("corpus:") {
        let i: usize = index
            .parse()
            .map_err(|_| SchemaError(format!("bad corpus index {index:?}")))?;
        let corpus = default_corpus();
        return corpus
            .get(i)
            .cloned()
            .ok_or_else(|| SchemaError(format!("corpus index {i} out of range (0..{})", corpus.len())));
    }
    if let Some(spec) = input.strip_prefix("bump:") {
        let parts: Vec<&str> = spec.split(',').collect();
        let [center, halfwidth] = parts.as_slice() else {
            return Err(SchemaError(format!("bump shorthand needs \"c,h\", got {spec:?}")));
        };
        let center: f64 = center
            .trim()
            .parse()
            .map_err(|_| SchemaError(format!("bad bump center {center:?}")))?;
        let halfwidth: f64 = halfwidth
            .trim()
            .parse()
            .map_err(|_| SchemaError(format!("bad bump halfwidth {halfwidth:?}")))?;
        let g = TestFn::bump(center, halfwidth);
        g.validate()
            .map_err(|e| SchemaError(format!("test function: {e}")))?;
        return Ok(g);
    }
    let text = match input.strip_prefix("file:") {
        Some(path) => read_file(path)?,
        None => input.into(),
    };
    let json: TestFnJson = serde_json::from_str(&text)
        .map_err(|e| SchemaError(format!("test-function argument: {e}")))?;
    json.to_testfn()
}

/// Look up a named functional. Returns `Ok(None)` when the argument is not
/// an `@name` reference at all (callers then treat it as a representative
/// expression).
pub fn lookup_functional(
    input: &str,
    session: Option<&Session>,
    policy: TruncationPolicy,
) -> Result<Option<hyperdist_core::GenFunctional>, SchemaError> {
    let Some(name) = input.trim().strip_prefix('@') else {
        return Ok(None);
    };
    let Some(session) = session else {
        return Err(SchemaError(format!("no session functional named {name:?}")));
    };
    if let Some(json) = session.functionals.get(name) {
        return Ok(Some(json.to_functional(policy)?));
    }
    // Fall through: `@name` may still be an expression reference.
    if session.exprs.contains_key(name) {
        return Ok(None);
    }
    Err(SchemaError(format!("no session functional named {name:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthands_resolve() {
        let policy = TruncationPolicy::default();
        assert_eq!(resolve_expr("var", None, policy).unwrap(), InternalExpr::Var);
        assert_eq!(resolve_expr("bump", None, policy).unwrap(), InternalExpr::Bump);
        assert!(matches!(
            resolve_expr("dirac", None, policy).unwrap(),
            InternalExpr::Mollify { .. }
        ));
        let g = resolve_testfn("corpus:0", None).unwrap();
        assert_eq!(g, default_corpus()[0]);
        assert_eq!(
            resolve_testfn("bump:0.5,2", None).unwrap(),
            TestFn::bump(0.5, 2.0)
        );
        assert!(resolve_testfn("bump:0.5", None).is_err());
        assert!(resolve_testfn("bump:0,-1", None).is_err());
    }

    #[test]
    fn session_lookup_and_errors() {
        let text = r#"{"exprs": {"two_x": {"op": "mul",
            "args": [{"op": "const", "value": "2"}, {"op": "var"}]}},
            "testfns": {"g": {"kind": "bump", "center": 0.5, "halfwidth": 2.0}},
            "functionals": {"ddelta": {"rep": {"op": "dirac"}, "deriv_order": 1}}}"#;
        let session: Session = serde_json::from_str(text).unwrap();
        session.check_labels().unwrap();
        let policy = TruncationPolicy::default();
        let e = resolve_expr("@two_x", Some(&session), policy).unwrap();
        assert!(matches!(e, InternalExpr::Mul(..)));
        let g = resolve_testfn("@g", Some(&session)).unwrap();
        assert_eq!(g, TestFn::bump(0.5, 2.0));

        let f = lookup_functional("@ddelta", Some(&session), policy)
            .unwrap()
            .unwrap();
        assert_eq!(f.deriv_order, 1);
        // An expression reference is not a functional; callers handle it.
        assert!(lookup_functional("@two_x", Some(&session), policy)
            .unwrap()
            .is_none());
        assert!(lookup_functional("@missing", Some(&session), policy).is_err());
        assert!(lookup_functional("dirac", None, policy).unwrap().is_none());

        assert!(resolve_expr("@missing", Some(&session), policy).is_err());
        assert!(resolve_expr("@two_x", None, policy).is_err());
        assert!(resolve_testfn("corpus:999", None).is_err());
        assert!(resolve_expr("{bad json", None, policy).is_err());
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let text = r#"{"exprs": {"a": {"op": "var"}},
            "testfns": {"a": {"kind": "bump", "center": 0.0, "halfwidth": 1.0}}}"#;
        let session: Session = serde_json::from_str(text).unwrap();
        assert!(session.check_labels().is_err());
    }

    #[test]
    fn file_references_resolve() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("hyperdist-{}-expr.json", std::process::id()));
        std::fs::write(&path, r#"{"op": "sin", "args": [{"op": "var"}]}"#).unwrap();
        let spec = format!("file:{}", path.display());
        let e = resolve_expr(&spec, None, TruncationPolicy::default()).unwrap();
        assert!(matches!(e, InternalExpr::Sin(_)));
        std::fs::remove_file(&path).unwrap();
        assert!(resolve_expr(&spec, None, TruncationPolicy::default()).is_err());
    }
}
