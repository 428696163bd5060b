//! Matching provider bot accounts to canonical author ids.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

const NOREPLY_DOMAIN: &str = "@users.noreply.github.com";

/// Identity hints for bot accounts reported by the hosting provider.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotHints {
    /// Account logins, e.g. `dependabot[bot]`.
    pub logins: BTreeSet<String>,
    /// Known commit emails, lowercased.
    pub emails: BTreeSet<String>,
}

impl BotHints {
    pub fn is_empty(&self) -> bool {
        self.logins.is_empty() && self.emails.is_empty()
    }

    pub fn add_login(&mut self, login: &str, account_id: Option<u64>) {
        let login = login.trim().to_lowercase();
        if login.is_empty() {
            return;
        }
        self.emails.insert(format!("{login}{NOREPLY_DOMAIN}"));
        if let Some(id) = account_id {
            self.emails.insert(format!("{id}+{login}{NOREPLY_DOMAIN}"));
        }
        self.logins.insert(login);
    }

    /// Whether a canonical author id belongs to one of the hinted bots.
    ///
    /// Exact email matches win; otherwise the local part of a provider
    /// noreply address (`[id+]login@users.noreply.github.com`) is compared
    /// against the logins. Name-keyed ids (no email) match a login directly.
    pub fn matches(&self, author_id: &str) -> bool {
        if self.emails.contains(author_id) {
            return true;
        }
        if let Some(local) = author_id.strip_suffix(NOREPLY_DOMAIN) {
            let login = match local.split_once('+') {
                Some((id, rest)) if id.chars().all(|c| c.is_ascii_digit()) => rest,
                _ => local,
            };
            return self.logins.contains(login);
        }
        !author_id.contains('@') && self.logins.contains(author_id)
    }

    /// The subset of `authors` identified as bots.
    pub fn resolve<'a, I>(&self, authors: I) -> BTreeSet<String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        authors
            .into_iter()
            .filter(|a| self.matches(a))
            .map(str::to_string)
            .collect()
    }
}
