//! Type forests and type-path algebra.
//!
//! Types are slash-paths (`/person/coach`); a type's parent is its path with
//! the last segment removed. The root above top-level types is implicit and
//! never a label. Depth counts segments, so `/person` has depth 1.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use crate::error::{read_to_string, Error, Result};
use crate::tape::AncestorLists;

/// Index of a type inside its [`TypeForest`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeForest {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

fn validate_path(path: &str) -> Result<()> {
    let ok = path.starts_with('/')
        && path.len() > 1
        && !path.chars().any(char::is_whitespace)
        && path[1..].split('/').all(|seg| !seg.is_empty());
    if ok {
        Ok(())
    } else {
        Err(Error::MalformedTypePath(path.to_string()))
    }
}

fn parent_path(path: &str) -> Option<&str> {
    match path.rfind('/') {
        Some(0) | None => None,
        Some(i) => Some(&path[..i]),
    }
}

impl TypeForest {
    /// Builds a forest from slash-paths. Implied intermediate types are
    /// added just before their first descendant; indices follow that order.
    pub fn parse<'a>(types: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut known: HashSet<String> = HashSet::new();
        let mut listed: HashSet<String> = HashSet::new();
        for t in types {
            validate_path(t)?;
            if !listed.insert(t.to_string()) {
                return Err(Error::DuplicateType(t.to_string()));
            }
            let mut chain = vec![t];
            let mut cur = t;
            while let Some(p) = parent_path(cur) {
                chain.push(p);
                cur = p;
            }
            for p in chain.into_iter().rev() {
                if known.insert(p.to_string()) {
                    order.push(p.to_string());
                }
            }
        }
        Self::from_ordered(order)
    }

    /// Parses the forest file format: one type per line, `#` comments.
    pub fn parse_text(text: &str) -> Result<Self> {
        Self::parse(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_text(&read_to_string(path)?)
    }

    /// Every parent must already be present; nothing is materialised.
    fn from_ordered(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            validate_path(n)?;
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::DuplicateType(n.clone()));
            }
        }
        let parent: Vec<Option<usize>> = names
            .iter()
            .map(|n| match parent_path(n) {
                None => Ok(None),
                Some(p) => index
                    .get(p)
                    .map(|&i| Some(i))
                    .ok_or_else(|| Error::RefinementAddsType(p.to_string())),
            })
            .collect::<Result<_>>()?;
        let depth = names.iter().map(|n| n.matches('/').count()).collect();
        let mut children = vec![Vec::new(); names.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        Ok(TypeForest {
            names,
            parent,
            depth,
            children,
            index,
        })
    }

    /// Number of types, K.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<TypeId> {
        self.index
            .get(name)
            .map(|&i| TypeId(i))
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn name(&self, t: TypeId) -> &str {
        &self.names[t.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = TypeId> {
        (0..self.names.len()).map(TypeId)
    }

    pub fn parent(&self, t: TypeId) -> Option<TypeId> {
        self.parent[t.0].map(TypeId)
    }

    pub fn children(&self, t: TypeId) -> impl Iterator<Item = TypeId> + '_ {
        self.children[t.0].iter().map(|&c| TypeId(c))
    }

    pub fn roots(&self) -> impl Iterator<Item = TypeId> + '_ {
        self.ids().filter(|&t| self.parent[t.0].is_none())
    }

    pub fn depth(&self, t: TypeId) -> usize {
        self.depth[t.0]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn is_leaf(&self, t: TypeId) -> bool {
        self.children[t.0].is_empty()
    }

    /// Proper ancestors of `t`, root first. Empty for top-level types.
    pub fn ancestors(&self, t: TypeId) -> Vec<TypeId> {
        let mut out = Vec::with_capacity(self.depth[t.0].saturating_sub(1));
        let mut cur = self.parent[t.0];
        while let Some(p) = cur {
            out.push(TypeId(p));
            cur = self.parent[p];
        }
        out.reverse();
        out
    }

    pub fn ancestors_of(&self, name: &str) -> Result<Vec<TypeId>> {
        Ok(self.ancestors(self.id(name)?))
    }

    /// True when `a` is a proper ancestor of `b`.
    pub fn is_ancestor(&self, a: TypeId, b: TypeId) -> bool {
        let mut cur = self.parent[b.0];
        while let Some(p) = cur {
            if p == a.0 {
                return true;
            }
            cur = self.parent[p];
        }
        false
    }

    /// The type-path ending at `t`: its ancestors followed by `t`.
    pub fn expand_to_path(&self, t: TypeId) -> Vec<TypeId> {
        let mut path = self.ancestors(t);
        path.push(t);
        path
    }

    /// Members of `types` that are not a proper ancestor of another member,
    /// sorted by index and deduplicated.
    pub fn terminal_set(&self, types: &[TypeId]) -> Result<Vec<TypeId>> {
        if types.is_empty() {
            return Err(Error::Empty("type set"));
        }
        let mut set: Vec<TypeId> = types.to_vec();
        set.sort_unstable();
        set.dedup();
        let mut covered = HashSet::new();
        for &t in &set {
            covered.extend(self.ancestors(t));
        }
        Ok(set.into_iter().filter(|t| !covered.contains(t)).collect())
    }

    /// True iff the set has exactly one terminal and every member lies on
    /// that terminal's path. Empty sets are not single paths.
    pub fn is_single_path(&self, types: &[TypeId]) -> bool {
        match self.terminal_set(types).as_deref() {
            Ok([terminal]) => {
                let path = self.expand_to_path(*terminal);
                types.iter().all(|t| path.contains(t))
            }
            _ => false,
        }
    }

    /// Ancestor index lists for every type, for hierarchy-aware losses.
    pub fn ancestor_lists(&self) -> AncestorLists {
        Arc::new(
            self.ids()
                .map(|t| self.ancestors(t).into_iter().map(|a| a.0).collect())
                .collect(),
        )
    }

    /// Renames types according to `map`, moving unmapped descendants along
    /// with their mapped ancestor. Type indices are preserved, so corpora
    /// labelled against `self` stay valid against the result.
    pub fn apply_refinement(&self, map: &RefinementMap) -> Result<TypeForest> {
        for (from, to) in map.entries() {
            self.id(from)?;
            validate_path(to)?;
            if to.starts_with(&format!("{from}/")) {
                return Err(Error::RefinementCycle(from.clone()));
            }
        }
        let renamed: Vec<String> = self
            .names
            .iter()
            .map(|name| {
                // The longest mapped prefix decides where a type moves.
                let mut cur = Some(name.as_str());
                while let Some(prefix) = cur {
                    if let Some(target) = map.get(prefix) {
                        return format!("{target}{}", &name[prefix.len()..]);
                    }
                    cur = parent_path(prefix);
                }
                name.clone()
            })
            .collect();
        let mut seen = HashMap::new();
        for (i, n) in renamed.iter().enumerate() {
            if let Some(j) = seen.insert(n.as_str(), i) {
                return Err(Error::NonBijective(format!(
                    "`{}` and `{}` both map to `{n}`",
                    self.names[j], self.names[i]
                )));
            }
        }
        Self::from_ordered(renamed)
    }
}

/// One-to-one renaming of types, read from `<old>\t<new>` lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefinementMap {
    entries: Vec<(String, String)>,
}

impl RefinementMap {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self> {
        let mut sources = HashSet::new();
        let mut targets = HashSet::new();
        for (from, to) in &entries {
            validate_path(from)?;
            validate_path(to)?;
            if !sources.insert(from.as_str()) {
                return Err(Error::NonBijective(format!("`{from}` mapped twice")));
            }
            if !targets.insert(to.as_str()) {
                return Err(Error::NonBijective(format!("`{to}` is the target of two types")));
            }
        }
        Ok(RefinementMap { entries })
    }

    /// The two corrections known for the Freebase-derived FIGER hierarchy.
    /// Further entries belong in a user-supplied refinement file.
    pub fn figer_known() -> Self {
        Self::new(vec![
            ("/software".into(), "/product/software".into()),
            ("/government".into(), "/organization/government".into()),
        ])
        .expect("static map is valid")
    }

    pub fn parse_text(text: &str, source_name: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim_end();
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(from), Some(to), None) => {
                    entries.push((from.trim().to_string(), to.trim().to_string()))
                }
                _ => {
                    return Err(Error::parse(
                        source_name,
                        n + 1,
                        "expected `<old-type>\\t<new-type>`",
                    ))
                }
            }
        }
        Self::new(entries)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_text(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, from: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(f, _)| f == from)
            .map(|(_, t)| t.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
