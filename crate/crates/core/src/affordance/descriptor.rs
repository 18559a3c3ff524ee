use serde::{Deserialize, Serialize};

use super::primitive::MotionType;
use super::AffordanceError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchType {
    PushButton,
    Rocker,
    TurnButton,
    Toggle,
}

impl SwitchType {
    pub const ALL: [SwitchType; 4] =
        [SwitchType::PushButton, SwitchType::Rocker, SwitchType::TurnButton, SwitchType::Toggle];

    /// Motion required to operate the switch; toggles have none we can execute.
    pub fn motion_type(self) -> Option<MotionType> {
        match self {
            SwitchType::TurnButton => Some(MotionType::Rotation),
            SwitchType::PushButton | SwitchType::Rocker => Some(MotionType::Translation),
            SwitchType::Toggle => None,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            SwitchType::PushButton => "push button",
            SwitchType::Rocker => "rocker switch",
            SwitchType::TurnButton => "turn button",
            SwitchType::Toggle => "toggle switch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrangement {
    Single,
    SideBySide,
    StackedVertically,
}

impl Arrangement {
    pub fn phrase(self) -> &'static str {
        match self {
            Arrangement::Single => "single button",
            Arrangement::SideBySide => "side-by-side",
            Arrangement::StackedVertically => "stacked vertically",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolHint {
    #[default]
    None,
    TopBottomPush,
}

/// What an element affords, as reported by an oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DescriptorRepr", into = "DescriptorRepr")]
pub struct AffordanceDescriptor {
    switch_type: SwitchType,
    button_count: u32,
    arrangement: Arrangement,
    symbol_hint: SymbolHint,
}

#[derive(Serialize, Deserialize)]
struct DescriptorRepr {
    switch_type: SwitchType,
    button_count: u32,
    arrangement: Arrangement,
    #[serde(default)]
    symbol_hint: SymbolHint,
}

impl TryFrom<DescriptorRepr> for AffordanceDescriptor {
    type Error = AffordanceError;

    fn try_from(r: DescriptorRepr) -> Result<Self, Self::Error> {
        Self::new(r.switch_type, r.button_count, r.arrangement, r.symbol_hint)
    }
}

impl From<AffordanceDescriptor> for DescriptorRepr {
    fn from(d: AffordanceDescriptor) -> Self {
        DescriptorRepr {
            switch_type: d.switch_type,
            button_count: d.button_count,
            arrangement: d.arrangement,
            symbol_hint: d.symbol_hint,
        }
    }
}

impl AffordanceDescriptor {
    pub fn new(
        switch_type: SwitchType,
        button_count: u32,
        arrangement: Arrangement,
        symbol_hint: SymbolHint,
    ) -> Result<Self, AffordanceError> {
        if button_count == 0 {
            return Err(AffordanceError::InconsistentDescriptor("button count is zero".into()));
        }
        if (button_count == 1) != (arrangement == Arrangement::Single) {
            return Err(AffordanceError::InconsistentDescriptor(format!(
                "{button_count} button(s) cannot be arranged as {}",
                arrangement.phrase()
            )));
        }
        if symbol_hint == SymbolHint::TopBottomPush
            && !matches!(switch_type, SwitchType::PushButton | SwitchType::Rocker)
        {
            return Err(AffordanceError::InconsistentDescriptor(format!(
                "top/bottom push symbols on a {}",
                switch_type.phrase()
            )));
        }
        Ok(Self { switch_type, button_count, arrangement, symbol_hint })
    }

    pub fn single(switch_type: SwitchType) -> Self {
        Self { switch_type, button_count: 1, arrangement: Arrangement::Single, symbol_hint: SymbolHint::None }
    }

    pub fn switch_type(&self) -> SwitchType {
        self.switch_type
    }

    pub fn button_count(&self) -> u32 {
        self.button_count
    }

    pub fn arrangement(&self) -> Arrangement {
        self.arrangement
    }

    pub fn symbol_hint(&self) -> SymbolHint {
        self.symbol_hint
    }

    /// Same descriptor with another switch type. Fails when the symbol hint
    /// is incompatible with the new type.
    pub fn with_switch_type(&self, t: SwitchType) -> Result<Self, AffordanceError> {
        Self::new(t, self.button_count, self.arrangement, self.symbol_hint)
    }

    /// Canonical free-text form, e.g. `"rocker switch, 1 button, single button, top/bot push"`.
    /// [`parse_affordance_response`](super::parse_affordance_response) maps it back.
    pub fn to_response_text(&self) -> String {
        let plural = if self.button_count == 1 { "button" } else { "buttons" };
        let mut s = format!(
            "{}, {} {plural}, {}",
            self.switch_type.phrase(),
            self.button_count,
            self.arrangement.phrase()
        );
        if self.symbol_hint == SymbolHint::TopBottomPush {
            s.push_str(", top/bot push");
        }
        s
    }
}
