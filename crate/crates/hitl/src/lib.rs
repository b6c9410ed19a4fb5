//! Human-in-the-loop service: neural selections are queued as pending
//! decisions that an operator approves or overrides over HTTP/JSON.
//!
//! One actor task owns the [`Session`]; handlers talk to it over a command
//! channel and read from snapshots republished after each mutation.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/health` | liveness |
//! | GET | `/api/state` | counts, agreement, confusion |
//! | POST | `/api/step` | enqueue the next decision (409 when the queue is full) |
//! | GET | `/api/decisions[?state=pending]` | all decisions |
//! | GET/POST | `/api/decision/{id}` | fetch / resolve with `{"action": "approve"\|"override", "agent": n}` |
//! | GET | `/api/feedback` | feedback log |
//! | POST | `/api/feedback/flush` | write the log as JSON lines |

mod error;
mod server;
mod session;

pub use error::HitlError;
pub use server::{router, serve, Handle, ServeOptions, Snapshot};
pub use session::{
    DecisionRequest, DecisionState, ExecutedOutcome, FlushReport, PendingDecision, Session, SessionConfig, SessionState,
    TaskSummary, DEFAULT_PENDING_CAP, PREVIEW_LEN,
};
