//! Design manifest loading and conformance checking.
//!
//! The manifest is the designer-authored contract: module names, port lists,
//! instantiation tree, and clock/reset conventions. Generated sources are
//! checked against it; every deviation is one diagnostic with an HC code.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{EdgePolarity, Item, ModuleDecl, PortDir, Sensitivity};
use crate::diag::{sort_diagnostics, Diagnostic, RuleCode, Severity};
use crate::parser::ParseResult;
use crate::source::{SourceMap, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActiveLevel {
    Low,
    High,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClockSpec {
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResetSpec {
    pub name: String,
    pub active: ActiveLevel,
    #[serde(default, rename = "async")]
    pub is_async: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub dir: String,
    pub width: u32,
}

impl PortSpec {
    pub fn direction(&self) -> Option<PortDir> {
        match self.dir.as_str() {
            "input" => Some(PortDir::Input),
            "output" => Some(PortDir::Output),
            "inout" => Some(PortDir::Inout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub module: String,
    pub instance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub name: String,
    pub ports: Vec<PortSpec>,
    #[serde(default)]
    pub children: Vec<InstanceSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignManifest {
    pub top: String,
    pub clock: ClockSpec,
    pub reset: ResetSpec,
    pub modules: Vec<ModuleSpec>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is not valid JSON: {0}")]
    Json(String),
    #[error("top module `{0}` is not declared in the manifest")]
    UnknownTop(String),
    #[error("module `{0}` is declared more than once")]
    DuplicateModule(String),
    #[error("port `{port}` is declared more than once in module `{module}`")]
    DuplicatePort { module: String, port: String },
    #[error("port `{port}` of module `{module}` has invalid direction `{dir}`")]
    BadDirection { module: String, port: String, dir: String },
    #[error("module `{module}` instantiates unknown module `{child}`")]
    DanglingChild { module: String, child: String },
    #[error("instance `{instance}` is declared more than once in module `{module}`")]
    DuplicateInstance { module: String, instance: String },
    #[error("instantiation graph has a cycle through `{0}`")]
    Cycle(String),
}

impl DesignManifest {
    pub fn module(&self, name: &str) -> Option<&ModuleSpec> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Module names children-first: every module appears after the modules
    /// it instantiates. Ties keep manifest order.
    pub fn topo_order(&self) -> Vec<String> {
        let mut order = Vec::new();
        let mut done: BTreeMap<&str, bool> = BTreeMap::new();
        fn visit<'a>(
            m: &'a ModuleSpec,
            manifest: &'a DesignManifest,
            done: &mut BTreeMap<&'a str, bool>,
            order: &mut Vec<String>,
        ) {
            if done.contains_key(m.name.as_str()) {
                return;
            }
            done.insert(&m.name, true);
            for c in &m.children {
                if let Some(child) = manifest.module(&c.module) {
                    visit(child, manifest, done, order);
                }
            }
            order.push(m.name.clone());
        }
        for m in &self.modules {
            visit(m, self, &mut done, &mut order);
        }
        order
    }
}

/// Parses and validates a manifest document.
pub fn load_manifest(bytes: &[u8]) -> Result<DesignManifest, ManifestError> {
    let manifest: DesignManifest = serde_json::from_slice(bytes).map_err(|e| {
        ManifestError::Json(format!("{e} (line {}, column {})", e.line(), e.column()))
    })?;

    let mut names = BTreeMap::new();
    for m in &manifest.modules {
        if names.insert(m.name.as_str(), ()).is_some() {
            return Err(ManifestError::DuplicateModule(m.name.clone()));
        }
        let mut ports = BTreeMap::new();
        for p in &m.ports {
            if ports.insert(p.name.as_str(), ()).is_some() {
                return Err(ManifestError::DuplicatePort {
                    module: m.name.clone(),
                    port: p.name.clone(),
                });
            }
            if p.direction().is_none() {
                return Err(ManifestError::BadDirection {
                    module: m.name.clone(),
                    port: p.name.clone(),
                    dir: p.dir.clone(),
                });
            }
        }
        let mut instances = BTreeMap::new();
        for c in &m.children {
            if instances.insert(c.instance.as_str(), ()).is_some() {
                return Err(ManifestError::DuplicateInstance {
                    module: m.name.clone(),
                    instance: c.instance.clone(),
                });
            }
        }
    }
    if manifest.module(&manifest.top).is_none() {
        return Err(ManifestError::UnknownTop(manifest.top.clone()));
    }
    for m in &manifest.modules {
        for c in &m.children {
            if manifest.module(&c.module).is_none() {
                return Err(ManifestError::DanglingChild {
                    module: m.name.clone(),
                    child: c.module.clone(),
                });
            }
        }
    }

    // Acyclicity by three-color depth-first search.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Visiting,
        Done,
    }
    fn dfs(
        name: &str,
        manifest: &DesignManifest,
        marks: &mut BTreeMap<String, Mark>,
    ) -> Result<(), ManifestError> {
        match marks.get(name) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Visiting) => return Err(ManifestError::Cycle(name.to_string())),
            None => {}
        }
        marks.insert(name.to_string(), Mark::Visiting);
        if let Some(m) = manifest.module(name) {
            for c in &m.children {
                dfs(&c.module, manifest, marks)?;
            }
        }
        marks.insert(name.to_string(), Mark::Done);
        Ok(())
    }
    let mut marks = BTreeMap::new();
    for m in &manifest.modules {
        dfs(&m.name, &manifest, &mut marks)?;
    }

    Ok(manifest)
}

#[derive(Debug)]
pub struct HierReport {
    pub diagnostics: Vec<Diagnostic>,
    pub pass: bool,
}

/// Members of the source set relevant to one check, with per-module taint
/// from error-severity diagnostics.
struct SourceIndex<'a> {
    modules: BTreeMap<&'a str, (&'a ModuleDecl, bool)>,
    order: Vec<&'a str>,
}

fn index_sources<'a>(files: &[&'a ParseResult]) -> SourceIndex<'a> {
    let mut modules = BTreeMap::new();
    let mut order = Vec::new();
    for pr in files {
        for m in &pr.ast.modules {
            let tainted = pr
                .diagnostics
                .iter()
                .any(|d| d.is_error() && m.span.contains(&d.span));
            if modules.insert(m.name.as_str(), (m, tainted)).is_none() {
                order.push(m.name.as_str());
            }
        }
    }
    SourceIndex { modules, order }
}

/// Checks parsed sources against the manifest. Modules with error-severity
/// parse diagnostics are reported missing (HC001) rather than checked.
pub fn check(manifest: &DesignManifest, files: &[&ParseResult], sm: &SourceMap) -> HierReport {
    let index = index_sources(files);
    let mut diagnostics = Vec::new();
    let anchor = anchor_span(files, sm);

    for spec in &manifest.modules {
        match index.modules.get(spec.name.as_str()) {
            None => {
                diagnostics.push(Diagnostic::new(
                    RuleCode::Hc001,
                    anchor,
                    format!("module `{}` is declared in the manifest but missing from the sources", spec.name),
                ));
            }
            Some((_, true)) => {
                diagnostics.push(Diagnostic::new(
                    RuleCode::Hc001,
                    anchor,
                    format!("module `{}` has parse errors and cannot be checked", spec.name),
                ));
            }
            Some((decl, false)) => {
                check_module(spec, decl, manifest, &mut diagnostics);
            }
        }
    }

    // Source modules the manifest does not declare.
    for name in &index.order {
        if manifest.module(name).is_none() {
            let (decl, _) = index.modules[name];
            diagnostics.push(
                Diagnostic::new(
                    RuleCode::Hc004,
                    decl.name_span,
                    format!("module `{name}` is not declared in the manifest"),
                )
                .with_hint("add it to the manifest or remove it"),
            );
        }
    }

    sort_diagnostics(&mut diagnostics);
    let pass = !diagnostics.iter().any(|d| d.severity == Severity::Error);
    HierReport { diagnostics, pass }
}

/// Scoped variant used by the generation loop: conformance of one module
/// only. HC001 applies only to the target; other manifest modules may be
/// absent without complaint.
pub fn check_module_scoped(
    manifest: &DesignManifest,
    files: &[&ParseResult],
    target: &str,
    sm: &SourceMap,
) -> HierReport {
    let index = index_sources(files);
    let mut diagnostics = Vec::new();
    let anchor = anchor_span(files, sm);
    match (manifest.module(target), index.modules.get(target)) {
        (Some(spec), Some((decl, false))) => {
            check_module(spec, decl, manifest, &mut diagnostics);
        }
        (Some(_), Some((_, true))) => {
            diagnostics.push(Diagnostic::new(
                RuleCode::Hc001,
                anchor,
                format!("module `{target}` has parse errors and cannot be checked"),
            ));
        }
        (Some(_), None) => {
            diagnostics.push(Diagnostic::new(
                RuleCode::Hc001,
                anchor,
                format!("module `{target}` was not produced"),
            ));
        }
        (None, _) => {
            diagnostics.push(Diagnostic::new(
                RuleCode::Hc001,
                anchor,
                format!("module `{target}` is not declared in the manifest"),
            ));
        }
    }
    sort_diagnostics(&mut diagnostics);
    let pass = !diagnostics.iter().any(|d| d.severity == Severity::Error);
    HierReport { diagnostics, pass }
}

/// Diagnostics need a span into something; fall back to the start of the
/// first file when the offender does not exist in any source.
fn anchor_span(files: &[&ParseResult], sm: &SourceMap) -> Span {
    match files.first() {
        Some(pr) => sm.span(pr.file, 0, 0),
        None => Span::dummy(),
    }
}

fn check_module(
    spec: &ModuleSpec,
    decl: &ModuleDecl,
    manifest: &DesignManifest,
    diagnostics: &mut Vec<Diagnostic>,
) {
    // Ports: each deviation is one HC002.
    for pspec in &spec.ports {
        match decl.port(&pspec.name) {
            None => {
                diagnostics.push(Diagnostic::new(
                    RuleCode::Hc002,
                    decl.name_span,
                    format!("module `{}` is missing port `{}`", spec.name, pspec.name),
                ));
            }
            Some(pdecl) => {
                if Some(pdecl.dir) != pspec.direction() {
                    diagnostics.push(Diagnostic::new(
                        RuleCode::Hc002,
                        pdecl.name_span,
                        format!(
                            "port `{}` of `{}` is declared {} but the manifest requires {}",
                            pspec.name,
                            spec.name,
                            pdecl.dir.as_str(),
                            pspec.dir
                        ),
                    ));
                }
                match decl.range_width(&pdecl.width) {
                    Some(w) if w == pspec.width => {}
                    Some(w) => {
                        diagnostics.push(Diagnostic::new(
                            RuleCode::Hc002,
                            pdecl.name_span,
                            format!(
                                "port `{}` of `{}` is {w} bits wide but the manifest requires {}",
                                pspec.name, spec.name, pspec.width
                            ),
                        ));
                    }
                    None => {
                        diagnostics.push(Diagnostic::new(
                            RuleCode::Hc002,
                            pdecl.name_span,
                            format!(
                                "port `{}` of `{}` has a non-constant width",
                                pspec.name, spec.name
                            ),
                        ));
                    }
                }
            }
        }
    }
    for pdecl in &decl.ports {
        if !spec.ports.iter().any(|p| p.name == pdecl.name) {
            diagnostics.push(Diagnostic::new(
                RuleCode::Hc002,
                pdecl.name_span,
                format!(
                    "port `{}` of `{}` is not declared in the manifest",
                    pdecl.name, spec.name
                ),
            ));
        }
    }

    // Instances: multiset difference, one HC003 per missing or extra entry.
    let mut actual: Vec<(&str, &str, Span)> = decl
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Instance(inst) => {
                Some((inst.module.as_str(), inst.instance.as_str(), inst.instance_span))
            }
            _ => None,
        })
        .collect();
    for cspec in &spec.children {
        match actual
            .iter()
            .position(|(m, i, _)| *m == cspec.module && *i == cspec.instance)
        {
            Some(pos) => {
                actual.remove(pos);
            }
            None => {
                diagnostics.push(Diagnostic::new(
                    RuleCode::Hc003,
                    decl.name_span,
                    format!(
                        "module `{}` must instantiate `{}` as `{}`",
                        spec.name, cspec.module, cspec.instance
                    ),
                ));
            }
        }
    }
    for (module, instance, span) in actual {
        diagnostics.push(Diagnostic::new(
            RuleCode::Hc003,
            span,
            format!(
                "instance `{instance}` of `{module}` in `{}` is not declared in the manifest",
                spec.name
            ),
        ));
    }

    // Clock and reset conventions.
    for item in &decl.items {
        let Item::Always(a) = item else { continue };
        let Sensitivity::Edges(edges) = &a.sensitivity else { continue };
        for e in edges {
            if e.signal == manifest.clock.name {
                if e.polarity != EdgePolarity::Pos {
                    diagnostics.push(Diagnostic::new(
                        RuleCode::Hc005,
                        e.span,
                        format!(
                            "clock `{}` must be sampled on its rising edge",
                            manifest.clock.name
                        ),
                    ));
                }
            } else if e.signal == manifest.reset.name {
                if !manifest.reset.is_async {
                    diagnostics.push(Diagnostic::new(
                        RuleCode::Hc005,
                        e.span,
                        format!(
                            "reset `{}` is synchronous and must not appear in a sensitivity list",
                            manifest.reset.name
                        ),
                    ));
                    continue;
                }
                let want = match manifest.reset.active {
                    ActiveLevel::Low => EdgePolarity::Neg,
                    ActiveLevel::High => EdgePolarity::Pos,
                };
                if e.polarity != want {
                    diagnostics.push(Diagnostic::new(
                        RuleCode::Hc005,
                        e.span,
                        format!(
                            "reset `{}` is active-{} and must use {}",
                            manifest.reset.name,
                            match manifest.reset.active {
                                ActiveLevel::Low => "low",
                                ActiveLevel::High => "high",
                            },
                            match want {
                                EdgePolarity::Neg => "negedge",
                                EdgePolarity::Pos => "posedge",
                            }
                        ),
                    ));
                }
            } else {
                diagnostics.push(Diagnostic::new(
                    RuleCode::Hc005,
                    e.span,
                    format!(
                        "edge signal `{}` in `{}` is neither the clock `{}` nor the reset `{}`",
                        e.signal, spec.name, manifest.clock.name, manifest.reset.name
                    ),
                ));
            }
        }
    }
}
