//! A live session: one engine owned by one task, fed through a command
//! queue. Readers see snapshots and a broadcast of frames and log records.

use std::collections::VecDeque;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use slicing_core::model::{SliceId, SliceIntent};
use slicing_core::scenario::{Scenario, SimEvent};
use slicing_core::sim::{ControlState, Engine, EngineOptions, LogRecord, Outcome, WhatIf};
use slicing_core::MetricsFrame;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::{interval, MissedTickBehavior};

use crate::reconcile::{Projector, ReconcileRecord};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Wall time between frames while running.
    pub frame_period: Duration,
    /// Frames kept for `since` queries.
    pub history: usize,
    pub options: EngineOptions,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            frame_period: Duration::from_secs(1),
            history: 3600,
            options: EngineOptions::default(),
        }
    }
}

/// Something pushed to live readers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum Push {
    Frame(MetricsFrame),
    Record(LogRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub now_ms: u64,
    pub running: bool,
    pub assurance_enabled: bool,
    pub frames: u64,
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceView {
    pub slice: SliceId,
    #[serde(flatten)]
    pub control: ControlState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<slicing_core::sim::SliceMetrics>,
}

#[derive(Debug, thiserror::Error)]
#[error("session has shut down")]
pub struct Closed;

enum Command {
    Submit(SliceIntent, oneshot::Sender<Outcome>),
    Retire(SliceId, oneshot::Sender<Outcome>),
    Run(bool),
    Step(u32, oneshot::Sender<Vec<MetricsFrame>>),
    Assurance(bool, oneshot::Sender<bool>),
}

struct Shared {
    engine: Arc<Engine>,
    running: bool,
    frames: VecDeque<MetricsFrame>,
    log: Vec<LogRecord>,
    reconcile: Vec<ReconcileRecord>,
}

#[derive(Clone)]
pub struct Session {
    commands: mpsc::Sender<Command>,
    shared: Arc<RwLock<Shared>>,
    push: broadcast::Sender<Push>,
}

impl Session {
    /// Starts a paused session on `scenario`. Its timed events play out as
    /// the session advances.
    pub fn spawn(scenario: &Scenario, config: SessionConfig) -> Session {
        let engine = Engine::new(
            scenario,
            EngineOptions {
                unbounded: true,
                ..config.options
            },
        );
        let shared = Arc::new(RwLock::new(Shared {
            engine: Arc::new(engine.clone()),
            running: false,
            frames: VecDeque::new(),
            log: Vec::new(),
            reconcile: Vec::new(),
        }));
        let (tx, rx) = mpsc::channel(64);
        let (push, _) = broadcast::channel(1024);
        let actor = Actor {
            engine,
            projector: Projector::default(),
            shared: shared.clone(),
            push: push.clone(),
            history: config.history.max(1),
        };
        tokio::spawn(actor.run(rx, config.frame_period));
        Session {
            commands: tx,
            shared,
            push,
        }
    }

    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Result<T, Closed> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(make(tx)).await.map_err(|_| Closed)?;
        rx.await.map_err(|_| Closed)
    }

    pub async fn submit(&self, intent: SliceIntent) -> Result<Outcome, Closed> {
        self.ask(|tx| Command::Submit(intent, tx)).await
    }

    pub async fn retire(&self, slice: SliceId) -> Result<Outcome, Closed> {
        self.ask(|tx| Command::Retire(slice, tx)).await
    }

    pub async fn set_running(&self, running: bool) -> Result<(), Closed> {
        self.commands.send(Command::Run(running)).await.map_err(|_| Closed)
    }

    pub async fn step(&self, count: u32) -> Result<Vec<MetricsFrame>, Closed> {
        self.ask(|tx| Command::Step(count, tx)).await
    }

    pub async fn set_assurance(&self, enabled: bool) -> Result<bool, Closed> {
        self.ask(|tx| Command::Assurance(enabled, tx)).await
    }

    fn read<T>(&self, f: impl FnOnce(&Shared) -> T) -> T {
        f(&self.shared.read().expect("session state lock"))
    }

    pub fn engine(&self) -> Arc<Engine> {
        self.read(|s| s.engine.clone())
    }

    pub fn whatif(&self, intent: &SliceIntent) -> WhatIf {
        self.engine().whatif(intent)
    }

    pub fn status(&self) -> Status {
        self.read(|s| Status {
            now_ms: s.engine.now_ms(),
            running: s.running,
            assurance_enabled: s.engine.assurance_enabled(),
            frames: s.frames.back().map_or(0, |f| f.seq + 1),
            records: s.engine.next_seq(),
        })
    }

    pub fn slices(&self) -> Vec<SliceView> {
        let engine = self.engine();
        let last = engine.last_frame();
        engine
            .control_state()
            .into_iter()
            .map(|(slice, control)| SliceView {
                slice,
                control,
                metrics: last.and_then(|f| f.slice(slice)).cloned(),
            })
            .collect()
    }

    /// Frames with `seq > since`, or all retained frames.
    pub fn frames_since(&self, since: Option<u64>) -> Vec<MetricsFrame> {
        self.read(|s| s.frames.iter().filter(|f| since.is_none_or(|n| f.seq > n)).cloned().collect())
    }

    pub fn records_since(&self, since: Option<u64>) -> Vec<LogRecord> {
        self.read(|s| s.log.iter().filter(|r| since.is_none_or(|n| r.seq > n)).cloned().collect())
    }

    pub fn reconcile_since(&self, since: Option<u64>) -> Vec<ReconcileRecord> {
        self.read(|s| {
            s.reconcile
                .iter()
                .filter(|r| since.is_none_or(|n| r.sequence > n))
                .cloned()
                .collect()
        })
    }

    /// Backlog after the given sequence numbers plus a receiver for
    /// everything published later, with no gap between the two.
    pub fn subscribe(&self, frames_since: Option<u64>, records_since: Option<u64>) -> (Vec<Push>, broadcast::Receiver<Push>) {
        let s = self.shared.read().expect("session state lock");
        let rx = self.push.subscribe();
        let mut backlog: Vec<Push> = s
            .log
            .iter()
            .filter(|r| records_since.is_none_or(|n| r.seq > n))
            .cloned()
            .map(Push::Record)
            .collect();
        backlog.extend(
            s.frames
                .iter()
                .filter(|f| frames_since.is_none_or(|n| f.seq > n))
                .cloned()
                .map(Push::Frame),
        );
        (backlog, rx)
    }
}

struct Actor {
    engine: Engine,
    projector: Projector,
    shared: Arc<RwLock<Shared>>,
    push: broadcast::Sender<Push>,
    history: usize,
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::Receiver<Command>, period: Duration) {
        let mut ticker = interval(period);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
        let mut running = false;
        loop {
            tokio::select! {
                cmd = rx.recv() => {
                    let Some(cmd) = cmd else { break };
                    match cmd {
                        Command::Submit(intent, reply) => {
                            let out = self.apply(SimEvent::SliceStart { intent });
                            let _ = reply.send(out);
                        }
                        Command::Retire(slice, reply) => {
                            let out = self.apply(SimEvent::SliceStop { slice });
                            let _ = reply.send(out);
                        }
                        Command::Run(on) => {
                            if on && !running {
                                ticker.reset();
                            }
                            running = on;
                            self.shared.write().expect("session state lock").running = on;
                        }
                        Command::Step(n, reply) => {
                            let frames = (0..n).filter_map(|_| self.step()).collect();
                            let _ = reply.send(frames);
                        }
                        Command::Assurance(enabled, reply) => {
                            self.apply(SimEvent::AssuranceToggle { enabled });
                            let _ = reply.send(self.engine.assurance_enabled());
                        }
                    }
                }
                _ = ticker.tick(), if running => {
                    self.step();
                }
            }
        }
    }

    fn apply(&mut self, event: SimEvent) -> Outcome {
        let (outcome, records) = self.engine.apply(event);
        self.publish(None, records);
        outcome
    }

    fn step(&mut self) -> Option<MetricsFrame> {
        let out = self.engine.step()?;
        self.publish(Some(out.frame.clone()), out.records);
        Some(out.frame)
    }

    fn publish(&mut self, frame: Option<MetricsFrame>, records: Vec<LogRecord>) {
        let reconcile = self.projector.project_all(&records);
        let mut s = self.shared.write().expect("session state lock");
        s.engine = Arc::new(self.engine.clone());
        s.reconcile.extend(reconcile);
        for r in records {
            s.log.push(r.clone());
            let _ = self.push.send(Push::Record(r));
        }
        if let Some(f) = frame {
            if s.frames.len() == self.history {
                s.frames.pop_front();
            }
            s.frames.push_back(f.clone());
            let _ = self.push.send(Push::Frame(f));
        }
    }
}
