//! Config presets compiled into the binary. `--config <name>` picks one of
//! these when no file of that name exists.

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// `(name, TOML text)` of every preset.
        pub const PRESETS: &[(&str, &str)] = &[$(($name, include_str!(concat!("../presets/", $name, ".toml")))),*];
    };
}

presets!(
    "chain10",
    "shot-noise",
    "depolarizing",
    "imperfect-bell",
    "symmetry-breaking",
    "unequal-hamiltonians",
    "intercopy-coupling",
    "emission",
    "epsilon-scaling",
    "fidelity-table",
    "landscape-zsum5",
    "landscape-uniform",
);

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use std::path::Path;

    #[test]
    fn every_preset_parses() {
        for (name, text) in PRESETS {
            let cfg =
                parse_config(text, Path::new(&format!("{name}.toml"))).unwrap_or_else(|e| panic!("{name}: {e:#}"));
            assert_eq!(cfg.name.as_deref(), Some(*name));
        }
    }
}
