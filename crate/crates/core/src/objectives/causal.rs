use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal relation of one attribute to the OM target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalTag {
    Independent,
    CausedByY,
    Confounded,
    /// Both caused by and confounded with the target; resolved by the
    /// graph variant.
    CausedOrConfounded,
    /// Not used for conditioning.
    Excluded,
}

/// Which class attributes tagged [`CausalTag::CausedOrConfounded`] fall into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphVariant {
    /// Treat them as confounded with the target.
    #[default]
    AConfoundedPreferred,
    /// Treat them as caused by the target.
    BCausedPreferred,
}

/// The penalty class an attribute resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintClass {
    Independent,
    Caused,
    Confounded,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CausalSpec {
    pub tags: BTreeMap<String, CausalTag>,
    #[serde(default)]
    pub variant: GraphVariant,
}

impl CausalSpec {
    pub fn new(tags: impl IntoIterator<Item = (String, CausalTag)>, variant: GraphVariant) -> Self {
        CausalSpec {
            tags: tags.into_iter().collect(),
            variant,
        }
    }

    /// Every attribute excluded.
    pub fn excluding_all(schema: &[String]) -> Self {
        Self::new(
            schema.iter().map(|n| (n.clone(), CausalTag::Excluded)),
            GraphVariant::default(),
        )
    }

    pub fn class_of(&self, name: &str) -> Option<ConstraintClass> {
        match self.tags.get(name)? {
            CausalTag::Independent => Some(ConstraintClass::Independent),
            CausalTag::CausedByY => Some(ConstraintClass::Caused),
            CausalTag::Confounded => Some(ConstraintClass::Confounded),
            CausalTag::CausedOrConfounded => Some(match self.variant {
                GraphVariant::AConfoundedPreferred => ConstraintClass::Confounded,
                GraphVariant::BCausedPreferred => ConstraintClass::Caused,
            }),
            CausalTag::Excluded => None,
        }
    }

    /// Every schema attribute must be tagged, and every tag must name a
    /// schema attribute.
    pub fn check_against(&self, schema: &[String]) -> Result<()> {
        if let Some(unknown) = self.tags.keys().find(|k| !schema.contains(k)) {
            return Err(Error::Invalid(format!(
                "causal spec tags unknown attribute `{unknown}`"
            )));
        }
        if let Some(untagged) = schema.iter().find(|n| !self.tags.contains_key(*n)) {
            return Err(Error::Invalid(format!(
                "attribute `{untagged}` has no causal tag"
            )));
        }
        Ok(())
    }

    /// Copy with one attribute dropped entirely.
    pub fn without(&self, name: &str) -> Self {
        let mut s = self.clone();
        s.tags.remove(name);
        s
    }

    /// Copy with the given attributes re-tagged as excluded.
    pub fn excluding<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Self {
        let mut s = self.clone();
        for n in names {
            if let Some(t) = s.tags.get_mut(n) {
                *t = CausalTag::Excluded;
            }
        }
        s
    }

    pub fn names_in(&self, class: ConstraintClass) -> Vec<&str> {
        self.tags
            .keys()
            .filter(|k| self.class_of(k) == Some(class))
            .map(String::as_str)
            .collect()
    }
}
