//! Named experiment recipes: TOML overlays of defaults that a run config
//! refines. Adding an experiment means adding an entry here, not code.

const RECIPES: &[(&str, &str)] = &[
    (
        "theorem-a",
        r#"
[boundary]
k = 2
[checks]
defects = true
well = true
bulk_bound = true
"#,
    ),
    (
        "theorem-b",
        r#"
[boundary]
k = 2
[schedule]
eps_from = 0.2
eps_to = 0.025
rungs = 7
[checks]
fit = true
w_compare = true
annulus = true
"#,
    ),
    (
        "theorem-c",
        r#"
[model]
energy = "csh"
[boundary]
k = 1
[schedule]
eps_from = 0.2
eps_to = 0.025
rungs = 7
[checks]
fit = true
well = false
bulk_bound = false
"#,
    ),
    (
        "ginzburg-landau",
        r#"
[model]
energy = "gl"
[boundary]
k = 1
[schedule]
eps_from = 0.2
eps_to = 0.025
rungs = 7
[checks]
fit = true
bulk_bound = false
"#,
    ),
    (
        "pohozaev",
        r#"
[boundary]
k = 1
[checks]
pohozaev = true
shift = true
"#,
    ),
    (
        "cell-problem",
        r#"
solve = false
[model]
l2 = 0.5
l3 = 0.5
[checks]
defects = false
well = false
bulk_bound = false
cell_problem = true
"#,
    ),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    RECIPES.iter().find(|r| r.0 == name).map(|r| r.1)
}

pub fn names() -> Vec<&'static str> {
    RECIPES.iter().map(|r| r.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn every_recipe_is_a_valid_config() {
        for name in names() {
            let c = RunConfig::from_toml(&format!("recipe = \"{name}\"\n")).unwrap();
            assert_eq!(c.recipe, name);
        }
    }
}
