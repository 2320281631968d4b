//! Hierarchical action vocabulary.
//!
//! Every action is a (macro, content) pair. The macro picks one of four
//! modes and the content picks a concrete key, hotkey, meta signal or mouse
//! triple inside that mode. Together they span 92 + 78 + 4 + 9*9*8 = 822
//! distinct actions.
//!
//! Actions have a canonical text form used by suite files and traces:
//!
//! ```text
//! single:<key>    hot:<combo>    meta:<name>    mouse:<region>:<subregion>:<interaction>
//! ```

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub const NUM_SINGLE_KEYS: usize = 92;
pub const NUM_HOTKEYS: usize = 78;
pub const NUM_META: usize = 4;
pub const NUM_REGIONS: usize = 9;
pub const NUM_SUBREGIONS: usize = 9;
pub const NUM_INTERACTIONS: usize = 8;
pub const NUM_MACROS: usize = 4;
pub const NUM_MOUSE: usize = NUM_REGIONS * NUM_SUBREGIONS * NUM_INTERACTIONS;
pub const NUM_ACTIONS: usize = NUM_SINGLE_KEYS + NUM_HOTKEYS + NUM_META + NUM_MOUSE;

/// Side length of the composed fine grid (3 coarse cells of 3 fine cells).
pub const GRID_SIDE: u8 = 9;

const BUILTIN_REGISTRY: &str = include_str!("../data/registry_v1.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MacroAction {
    SingleKey,
    HotKey,
    Meta,
    Mouse,
}

impl MacroAction {
    pub const ALL: [MacroAction; NUM_MACROS] = [
        MacroAction::SingleKey,
        MacroAction::HotKey,
        MacroAction::Meta,
        MacroAction::Mouse,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::Range {
            what: "macro index",
            value: index as i64,
            bound: NUM_MACROS as i64,
        })
    }

    /// Number of concrete actions available under this macro.
    pub fn content_size(self) -> usize {
        match self {
            MacroAction::SingleKey => NUM_SINGLE_KEYS,
            MacroAction::HotKey => NUM_HOTKEYS,
            MacroAction::Meta => NUM_META,
            MacroAction::Mouse => NUM_MOUSE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetaAction {
    Start,
    Stop,
    Wait,
    TextInput,
}

impl MetaAction {
    pub const ALL: [MetaAction; NUM_META] = [
        MetaAction::Start,
        MetaAction::Stop,
        MetaAction::Wait,
        MetaAction::TextInput,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::Range {
            what: "meta index",
            value: index as i64,
            bound: NUM_META as i64,
        })
    }
}

fn check_range(what: &'static str, value: usize, bound: usize) -> Result<u8> {
    if value < bound {
        Ok(value as u8)
    } else {
        Err(Error::Range {
            what,
            value: value as i64,
            bound: bound as i64,
        })
    }
}

/// Index into the single-key list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyIndex(u8);

impl KeyIndex {
    pub fn new(index: usize) -> Result<Self> {
        check_range("key index", index, NUM_SINGLE_KEYS).map(Self)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

/// Index into the hotkey list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HotkeyIndex(u8);

impl HotkeyIndex {
    pub fn new(index: usize) -> Result<Self> {
        check_range("hotkey index", index, NUM_HOTKEYS).map(Self)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

/// A (region, subregion, interaction) mouse triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MouseTarget {
    region: u8,
    subregion: u8,
    interaction: u8,
}

impl MouseTarget {
    pub fn new(region: usize, subregion: usize, interaction: usize) -> Result<Self> {
        Ok(Self {
            region: check_range("region", region, NUM_REGIONS)?,
            subregion: check_range("subregion", subregion, NUM_SUBREGIONS)?,
            interaction: check_range("interaction", interaction, NUM_INTERACTIONS)?,
        })
    }

    pub fn region(self) -> usize {
        self.region as usize
    }

    pub fn subregion(self) -> usize {
        self.subregion as usize
    }

    pub fn interaction(self) -> usize {
        self.interaction as usize
    }

    /// Position on the composed 9x9 grid.
    pub fn coords(self) -> (u8, u8) {
        compose(self.region, self.subregion)
    }

    /// Euclidean distance between the two cursor positions, ignoring the interaction.
    pub fn distance(self, other: MouseTarget) -> f64 {
        cell_distance(self.coords(), other.coords())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Single(KeyIndex),
    Hot(HotkeyIndex),
    Meta(MetaAction),
    Mouse(MouseTarget),
}

impl Action {
    pub const STOP: Action = Action::Meta(MetaAction::Stop);
    pub const WAIT: Action = Action::Meta(MetaAction::Wait);

    pub fn macro_action(&self) -> MacroAction {
        match self {
            Action::Single(_) => MacroAction::SingleKey,
            Action::Hot(_) => MacroAction::HotKey,
            Action::Meta(_) => MacroAction::Meta,
            Action::Mouse(_) => MacroAction::Mouse,
        }
    }

    pub fn is_stop(&self) -> bool {
        *self == Action::STOP
    }

    /// Index of the content inside its macro's subspace.
    ///
    /// Mouse triples are laid out row-major over (region, subregion, interaction).
    pub fn content_index(&self) -> usize {
        match *self {
            Action::Single(k) => k.get(),
            Action::Hot(h) => h.get(),
            Action::Meta(m) => m.index(),
            Action::Mouse(t) => {
                (t.region() * NUM_SUBREGIONS + t.subregion()) * NUM_INTERACTIONS + t.interaction()
            }
        }
    }

    pub fn from_parts(macro_action: MacroAction, content_index: usize) -> Result<Self> {
        match macro_action {
            MacroAction::SingleKey => KeyIndex::new(content_index).map(Action::Single),
            MacroAction::HotKey => HotkeyIndex::new(content_index).map(Action::Hot),
            MacroAction::Meta => MetaAction::from_index(content_index).map(Action::Meta),
            MacroAction::Mouse => {
                check_range("mouse index", content_index, NUM_MOUSE)?;
                let interaction = content_index % NUM_INTERACTIONS;
                let cell = content_index / NUM_INTERACTIONS;
                MouseTarget::new(cell / NUM_SUBREGIONS, cell % NUM_SUBREGIONS, interaction)
                    .map(Action::Mouse)
            }
        }
    }

    /// Position in the flat 822-way enumeration: single keys, hotkeys, metas, then mouse.
    pub fn flatten(&self) -> usize {
        macro_offset(self.macro_action()) + self.content_index()
    }

    pub fn unflatten(index: usize) -> Result<Self> {
        check_range("flat action index", index, NUM_ACTIONS)?;
        let macro_action = MacroAction::ALL
            .iter()
            .rev()
            .copied()
            .find(|m| macro_offset(*m) <= index)
            .expect("offset of first macro is zero");
        Action::from_parts(macro_action, index - macro_offset(macro_action))
    }

    /// Every valid action in flat-index order.
    pub fn all() -> impl Iterator<Item = Action> {
        (0..NUM_ACTIONS).map(|i| Action::unflatten(i).expect("index in range"))
    }
}

fn macro_offset(m: MacroAction) -> usize {
    match m {
        MacroAction::SingleKey => 0,
        MacroAction::HotKey => NUM_SINGLE_KEYS,
        MacroAction::Meta => NUM_SINGLE_KEYS + NUM_HOTKEYS,
        MacroAction::Mouse => NUM_SINGLE_KEYS + NUM_HOTKEYS + NUM_META,
    }
}

fn compose(region: u8, subregion: u8) -> (u8, u8) {
    let x = (region % 3) * 3 + subregion % 3;
    let y = (region / 3) * 3 + subregion / 3;
    (x, y)
}

fn cell_distance(a: (u8, u8), b: (u8, u8)) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Maps a (region, subregion) pair onto the 9x9 fine grid.
///
/// Regions tile the screen as a row-major 3x3 grid and each region is split
/// the same way into subregions.
pub fn grid_coords(region: usize, subregion: usize) -> Result<(u8, u8)> {
    let r = check_range("region", region, NUM_REGIONS)?;
    let s = check_range("subregion", subregion, NUM_SUBREGIONS)?;
    Ok(compose(r, s))
}

pub fn mouse_distance(a: (usize, usize), b: (usize, usize)) -> Result<f64> {
    Ok(cell_distance(grid_coords(a.0, a.1)?, grid_coords(b.0, b.1)?))
}

/// Names for every index of the action space, loaded from a sectioned data file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionRegistry {
    key_names: Vec<String>,
    hotkey_names: Vec<String>,
    meta_names: Vec<String>,
    interaction_names: Vec<String>,
    keys: HashMap<String, usize>,
    hotkeys: HashMap<String, usize>,
    metas: HashMap<String, usize>,
    interactions: HashMap<String, usize>,
}

impl Default for ActionRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ActionRegistry {
    /// The registry shipped with the crate (`data/registry_v1.txt`).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_REGISTRY).expect("bundled registry is well formed")
    }

    /// Parses the registry file format: `[single]`, `[hot]`, `[meta]` and
    /// `[interaction]` sections with one name per line. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: [Vec<String>; 4] = Default::default();
        let mut current: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let idx = match header {
                    "single" => 0,
                    "hot" => 1,
                    "meta" => 2,
                    "interaction" => 3,
                    other => return Err(Error::schema(line_no, format!("unknown section [{other}]"))),
                };
                if !sections[idx].is_empty() {
                    return Err(Error::schema(line_no, format!("section [{header}] repeated")));
                }
                current = Some(idx);
                continue;
            }
            let Some(idx) = current else {
                return Err(Error::schema(line_no, "name outside of any section"));
            };
            if line.contains(':') || line.chars().any(char::is_whitespace) {
                return Err(Error::schema(line_no, format!("invalid name {line:?}")));
            }
            if sections[idx].iter().any(|n| n == line) {
                return Err(Error::schema(line_no, format!("duplicate name {line:?}")));
            }
            sections[idx].push(line.to_string());
        }

        let expected = [NUM_SINGLE_KEYS, NUM_HOTKEYS, NUM_META, NUM_INTERACTIONS];
        let labels = ["single", "hot", "meta", "interaction"];
        for ((names, want), label) in sections.iter().zip(expected).zip(labels) {
            if names.len() != want {
                return Err(Error::schema(
                    text.lines().count(),
                    format!("section [{label}] has {} names, expected {want}", names.len()),
                ));
            }
        }
        let meta_expected = ["start", "stop", "wait", "text_input"];
        if sections[2] != meta_expected {
            return Err(Error::schema(
                0,
                format!("[meta] must list {}", meta_expected.join(", ")),
            ));
        }

        let [key_names, hotkey_names, meta_names, interaction_names] = sections;
        let index = |names: &[String]| -> HashMap<String, usize> {
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect()
        };
        Ok(Self {
            keys: index(&key_names),
            hotkeys: index(&hotkey_names),
            metas: index(&meta_names),
            interactions: index(&interaction_names),
            key_names,
            hotkey_names,
            meta_names,
            interaction_names,
        })
    }

    /// Serialises back into the sectioned file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (label, names) in [
            ("single", &self.key_names),
            ("hot", &self.hotkey_names),
            ("meta", &self.meta_names),
            ("interaction", &self.interaction_names),
        ] {
            out.push_str(&format!("[{label}]\n"));
            for n in names {
                out.push_str(n);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    pub fn key_names(&self) -> &[String] {
        &self.key_names
    }

    pub fn hotkey_names(&self) -> &[String] {
        &self.hotkey_names
    }

    pub fn meta_names(&self) -> &[String] {
        &self.meta_names
    }

    pub fn interaction_names(&self) -> &[String] {
        &self.interaction_names
    }

    pub fn key_index(&self, name: &str) -> Option<usize> {
        self.keys.get(name).copied()
    }

    pub fn hotkey_index(&self, name: &str) -> Option<usize> {
        self.hotkeys.get(name).copied()
    }

    pub fn meta_index(&self, name: &str) -> Option<usize> {
        self.metas.get(name).copied()
    }

    pub fn interaction_index(&self, name: &str) -> Option<usize> {
        self.interactions.get(name).copied()
    }

    /// Parses the canonical action grammar. Case-sensitive.
    pub fn parse_action(&self, text: &str) -> Result<Action> {
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(text.to_string()))?;
        let lookup = |table: &HashMap<String, usize>, name: &str| {
            table
                .get(name)
                .copied()
                .ok_or_else(|| Error::Parse(name.to_string()))
        };
        match kind {
            "single" => KeyIndex::new(lookup(&self.keys, rest)?).map(Action::Single),
            "hot" => HotkeyIndex::new(lookup(&self.hotkeys, rest)?).map(Action::Hot),
            "meta" => MetaAction::from_index(lookup(&self.metas, rest)?).map(Action::Meta),
            "mouse" => {
                let mut parts = rest.split(':');
                let (Some(r), Some(s), Some(i), None) =
                    (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(Error::Parse(text.to_string()));
                };
                let region = parse_cell("region", r, NUM_REGIONS)?;
                let subregion = parse_cell("subregion", s, NUM_SUBREGIONS)?;
                let interaction = lookup(&self.interactions, i)?;
                MouseTarget::new(region, subregion, interaction).map(Action::Mouse)
            }
            _ => Err(Error::Parse(kind.to_string())),
        }
    }

    pub fn format_action(&self, action: &Action) -> String {
        match *action {
            Action::Single(k) => format!("single:{}", self.key_names[k.get()]),
            Action::Hot(h) => format!("hot:{}", self.hotkey_names[h.get()]),
            Action::Meta(m) => format!("meta:{}", self.meta_names[m.index()]),
            Action::Mouse(t) => format!(
                "mouse:{}:{}:{}",
                t.region(),
                t.subregion(),
                self.interaction_names[t.interaction()]
            ),
        }
    }

    /// Wraps an action so it prints in canonical form.
    pub fn display<'a>(&'a self, action: &'a Action) -> ActionDisplay<'a> {
        ActionDisplay {
            registry: self,
            action,
        }
    }
}

fn parse_cell(what: &'static str, text: &str, bound: usize) -> Result<usize> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit() || b == b'-') {
        return Err(Error::Parse(text.to_string()));
    }
    let value: i64 = text.parse().map_err(|_| Error::Parse(text.to_string()))?;
    if value < 0 || value >= bound as i64 {
        return Err(Error::Range {
            what,
            value,
            bound: bound as i64,
        });
    }
    Ok(value as usize)
}

pub struct ActionDisplay<'a> {
    registry: &'a ActionRegistry,
    action: &'a Action,
}

impl fmt::Display for ActionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.registry.format_action(self.action))
    }
}
