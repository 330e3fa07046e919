/// Step accounting: `floor(n_samples * n_epochs / batch_size)` training
/// steps and `max(1, floor(steps / 1000))` evaluation events.
pub fn compute_steps(n_samples: u64, n_epochs: u64, batch_size: u64) -> (u64, u64) {
    let steps = n_samples * n_epochs / batch_size.max(1);
    (steps, (steps / 1000).max(1))
}

/// Steps after which evaluation runs: every `floor(steps / events)` steps,
/// `events` times in total. Empty when there are no steps.
pub fn eval_steps(n_train_steps: u64, n_eval_events: u64) -> Vec<u64> {
    if n_train_steps == 0 || n_eval_events == 0 {
        return Vec::new();
    }
    let events = n_eval_events.min(n_train_steps);
    let every = n_train_steps / events;
    (1..=events).map(|k| k * every).collect()
}

/// Stops once eval loss has failed to beat its running minimum on
/// `patience` consecutive events. Zero patience never stops.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub bad_events: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            bad_events: 0,
        }
    }

    /// Record one eval loss; returns true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        match self.best {
            Some(b) if loss >= b => self.bad_events += 1,
            _ => {
                self.best = Some(loss);
                self.bad_events = 0;
            }
        }
        self.patience > 0 && self.bad_events >= self.patience
    }

    /// Whether the last observation set a new minimum.
    pub fn improved(&self) -> bool {
        self.bad_events == 0
    }
}
