use super::RiskCategory;

/// Bumped whenever the keyword table changes.
pub const CATEGORY_TABLE_VERSION: u32 = 1;

#[derive(Clone, Copy)]
enum Named {
    Bystander,
    Location,
    Confidential,
    Identity,
    SelfDisclosure,
}

// Checked top to bottom; the first hit wins. Bystander comes first so that
// "bystander's identity" is not read as identity exposure. A trailing `*`
// makes the last word a prefix match.
const TABLE: &[(Named, &[&str])] = &[
    (
        Named::Bystander,
        &[
            "bystander*",
            "others nearby",
            "other people",
            "others",
            "uninvolved*",
            "stranger*",
            "people in background",
            "people in the background",
            "third part*",
            "passerby",
            "passersby",
            "crowd*",
            "acquaintance*",
            "coworker*",
            "friends",
        ],
    ),
    (
        Named::Location,
        &[
            "where you*",
            "where",
            "location*",
            "locat*",
            "landmark*",
            "whereabouts",
            "address*",
            "neighborhood",
            "neighbourhood",
            "geolocat*",
            "route*",
            "movement*",
            "home",
        ],
    ),
    (
        Named::Confidential,
        &[
            "confidential*",
            "private data",
            "secret*",
            "sensitive info*",
            "sensitive data",
            "data",
            "document*",
            "screen*",
            "financial*",
            "password*",
            "account*",
            "credit card*",
            "leak*",
            "client*",
        ],
    ),
    (
        Named::Identity,
        &[
            "identity",
            "identit*",
            "identif*",
            "who you are",
            "face*",
            "recogni*",
            "name",
            "tattoo*",
        ],
    ),
    (
        Named::SelfDisclosure,
        &[
            "personal*",
            "habit*",
            "lifestyle",
            "private life",
            "health*",
            "medical*",
            "medication*",
            "religio*",
            "belief*",
            "hobb*",
            "interest*",
            "preference*",
            "pastime*",
            "relationship*",
            "routine*",
            "alcohol",
            "drinking",
            "diary",
        ],
    ),
];

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace(['\u{2019}', '\u{2018}'], "'")
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.strip_suffix("'s").unwrap_or(t);
            t.replace('\'', "")
        })
        .filter(|t| !t.is_empty())
        .collect()
}

fn phrase_matches(words: &[String], phrase: &str) -> bool {
    let parts: Vec<&str> = phrase.split_whitespace().collect();
    if parts.is_empty() || parts.len() > words.len() {
        return false;
    }
    words.windows(parts.len()).any(|win| {
        win.iter()
            .zip(&parts)
            .enumerate()
            .all(|(i, (w, p))| match p.strip_suffix('*') {
                Some(stem) if i == parts.len() - 1 => w.starts_with(stem),
                _ => w == p,
            })
    })
}

fn lookup(text: &str) -> Option<Named> {
    let words = tokens(text);
    TABLE
        .iter()
        .find(|(_, phrases)| phrases.iter().any(|p| phrase_matches(&words, p)))
        .map(|(c, _)| *c)
}

/// Maps a risk label (then its element causes) onto one of the five named
/// categories, falling back to `Other(label)`.
pub fn classify_category(risk_label: &str, risk_cause_phrases: &[&str]) -> RiskCategory {
    let hit = lookup(risk_label).or_else(|| lookup(&risk_cause_phrases.join(" ")));
    match hit {
        Some(Named::Bystander) => RiskCategory::Bystander,
        Some(Named::Location) => RiskCategory::LocationExposure,
        Some(Named::Confidential) => RiskCategory::ConfidentialInformationLeakage,
        Some(Named::Identity) => RiskCategory::IdentityExposure,
        Some(Named::SelfDisclosure) => RiskCategory::SelfDisclosure,
        None => RiskCategory::Other(risk_label.trim().to_string()),
    }
}
