//! Environment-based split planning.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Dataset, EnvironmentId};
use crate::error::{Error, Result};
use crate::geo::{select_finetune_env, FinetuneStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Ood,
    Kfold,
}

/// Disjoint train / fine-tune / test environment sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_envs: BTreeSet<EnvironmentId>,
    pub finetune_envs: BTreeSet<EnvironmentId>,
    pub test_envs: BTreeSet<EnvironmentId>,
    pub kind: SplitKind,
}

impl SplitPlan {
    pub fn sites_of(envs: &BTreeSet<EnvironmentId>) -> BTreeSet<&str> {
        envs.iter().map(|e| e.site.as_str()).collect()
    }

    pub fn test_site_codes(&self) -> BTreeSet<&str> {
        Self::sites_of(&self.test_envs)
    }

    pub fn finetune_site_codes(&self) -> BTreeSet<&str> {
        Self::sites_of(&self.finetune_envs)
    }

    /// Checks pairwise disjointness, site purity and non-empty test set.
    pub fn validate(&self) -> Result<()> {
        if self.test_envs.is_empty() {
            return Err(Error::Split("test environment set is empty".into()));
        }
        let sets = [&self.train_envs, &self.finetune_envs, &self.test_envs];
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                if !a.is_disjoint(b) {
                    return Err(Error::Split("environment sets overlap".into()));
                }
                if !Self::sites_of(a).is_disjoint(&Self::sites_of(b)) {
                    return Err(Error::Split("a site appears in two roles".into()));
                }
            }
        }
        Ok(())
    }
}

fn envs_of_sites(ds: &Dataset, codes: &BTreeSet<&str>) -> BTreeSet<EnvironmentId> {
    ds.environments()
        .into_iter()
        .filter(|e| codes.contains(e.site.as_str()))
        .collect()
}

/// Holds out every environment of `test_sites`; the rest trains.
pub fn make_ood_split(ds: &Dataset, test_sites: &[&str]) -> Result<SplitPlan> {
    if test_sites.is_empty() {
        return Err(Error::Split("no test sites given".into()));
    }
    let present: BTreeSet<&str> = ds.active_sites().iter().map(|s| s.code.as_str()).collect();
    let test: BTreeSet<&str> = test_sites.iter().copied().collect();
    if let Some(missing) = test.iter().find(|c| !present.contains(*c)) {
        return Err(Error::Split(format!("test site `{missing}` has no samples")));
    }
    if test.len() == present.len() {
        return Err(Error::Split("test sites cover every site; nothing left to train on".into()));
    }
    let train: BTreeSet<&str> = present.difference(&test).copied().collect();
    let plan = SplitPlan {
        train_envs: envs_of_sites(ds, &train),
        finetune_envs: BTreeSet::new(),
        test_envs: envs_of_sites(ds, &test),
        kind: SplitKind::Ood,
    };
    plan.validate()?;
    Ok(plan)
}

/// One plan per site held out as test (site-table order). With a fine-tune
/// strategy, one further site is chosen for adaptation and the remaining
/// `K - 2` sites train.
pub fn make_kfold_plans(
    ds: &Dataset,
    strategy: FinetuneStrategy,
    seed: u64,
) -> Result<Vec<SplitPlan>> {
    let sites: Vec<_> = ds.active_sites().into_iter().cloned().collect();
    let k = sites.len();
    if strategy != FinetuneStrategy::None && k < 3 {
        return Err(Error::Split(format!(
            "fine-tune strategy `{}` needs at least 3 sites, dataset has {k}",
            strategy.label()
        )));
    }
    if k < 2 {
        return Err(Error::Split(format!("k-fold needs at least 2 sites, dataset has {k}")));
    }
    let mut plans = Vec::with_capacity(k);
    for (fold, test) in sites.iter().enumerate() {
        let others: Vec<_> = sites.iter().filter(|s| s.code != test.code).cloned().collect();
        let ft = match strategy {
            FinetuneStrategy::None => None,
            s => Some(select_finetune_env(
                s,
                test,
                &others,
                crate::seed::derive(seed, &[fold as u64]),
            )?),
        };
        let ft_codes: BTreeSet<&str> = ft.iter().map(|s| s.code.as_str()).collect();
        let train: BTreeSet<&str> = others
            .iter()
            .map(|s| s.code.as_str())
            .filter(|c| !ft_codes.contains(c))
            .collect();
        let plan = SplitPlan {
            train_envs: envs_of_sites(ds, &train),
            finetune_envs: envs_of_sites(ds, &ft_codes),
            test_envs: envs_of_sites(ds, &BTreeSet::from([test.code.as_str()])),
            kind: SplitKind::Kfold,
        };
        plan.validate()?;
        plans.push(plan);
    }
    Ok(plans)
}
