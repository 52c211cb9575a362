//! Occupation words and their majority-gender stereotype (WinoBias occupation set
//! plus a few common Winogender occupations).

use crate::corpus::PronounGender;

const MALE_STEREOTYPED: &[&str] = &[
    "construction worker",
    "driver",
    "supervisor",
    "janitor",
    "cook",
    "mover",
    "laborer",
    "chief",
    "developer",
    "carpenter",
    "manager",
    "lawyer",
    "farmer",
    "salesperson",
    "physician",
    "guard",
    "analyst",
    "mechanic",
    "sheriff",
    "CEO",
    "engineer",
    "worker",
    "pharmacist",
    "surgeon",
    "plumber",
    "electrician",
];

const FEMALE_STEREOTYPED: &[&str] = &[
    "attendant",
    "cashier",
    "teacher",
    "nurse",
    "assistant",
    "secretary",
    "auditor",
    "cleaner",
    "receptionist",
    "clerk",
    "counselor",
    "designer",
    "hairdresser",
    "writer",
    "housekeeper",
    "baker",
    "accountant",
    "editor",
    "librarian",
    "tailor",
    "dietitian",
    "hygienist",
    "paralegal",
];

/// The WinoBias occupation inventory, longest phrases first.
pub fn winobias_occupations() -> impl Iterator<Item = &'static str> {
    MALE_STEREOTYPED[..20]
        .iter()
        .chain(FEMALE_STEREOTYPED[..20].iter())
        .copied()
}

pub fn stereotyped_gender(occupation: &str) -> Option<PronounGender> {
    let needle = occupation.trim().to_lowercase();
    let hit = |list: &[&str]| list.iter().any(|o| o.to_lowercase() == needle);
    if hit(MALE_STEREOTYPED) {
        Some(PronounGender::Masculine)
    } else if hit(FEMALE_STEREOTYPED) {
        Some(PronounGender::Feminine)
    } else {
        None
    }
}
