use std::fmt;

use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Open,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub text: String,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Done,
    Failed { note: String, replacement: Option<String> },
}

/// Ordered checklist. Steps only move open to done or open to failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanChecklist {
    pub steps: Vec<PlanStep>,
}

impl PlanChecklist {
    pub fn new<S: Into<String>>(steps: impl IntoIterator<Item = S>) -> Self {
        Self {
            steps: steps
                .into_iter()
                .map(|t| PlanStep { text: t.into(), status: StepStatus::Open, note: None })
                .collect(),
        }
    }

    pub fn first_open(&self) -> Option<usize> {
        self.steps.iter().position(|s| s.status == StepStatus::Open)
    }

    pub fn open_count(&self) -> usize {
        self.steps.iter().filter(|s| s.status == StepStatus::Open).count()
    }

    pub fn update(&mut self, index: usize, outcome: StepOutcome) -> Result<(), AgentError> {
        let len = self.steps.len();
        let step = self.steps.get_mut(index).ok_or(AgentError::InvalidStep { index, len })?;
        if step.status != StepStatus::Open {
            return Ok(());
        }
        match outcome {
            StepOutcome::Done => step.status = StepStatus::Done,
            StepOutcome::Failed { note, replacement } => {
                step.status = StepStatus::Failed;
                step.note = Some(note);
                if let Some(text) = replacement {
                    self.steps.insert(index + 1, PlanStep { text, status: StepStatus::Open, note: None });
                }
            }
        }
        Ok(())
    }

    /// Checkbox rendering: `[ ]` open, `[v]` done, `[x]` failed with its reason.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

/// Returns the plan with `outcome` applied to step `index`.
pub fn update_plan(plan: &PlanChecklist, index: usize, outcome: StepOutcome) -> Result<PlanChecklist, AgentError> {
    let mut p = plan.clone();
    p.update(index, outcome)?;
    Ok(p)
}

impl fmt::Display for PlanChecklist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            let mark = match s.status {
                StepStatus::Open => "[ ]",
                StepStatus::Done => "[v]",
                StepStatus::Failed => "[x]",
            };
            write!(f, "{}. {mark} {}", i + 1, s.text)?;
            if let Some(n) = &s.note {
                write!(f, " ({n})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
