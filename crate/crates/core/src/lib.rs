//! Point-process model of discussion-forum activity.
//!
//! Each thread carries one latent topic. Its initial post arrives from a
//! per-learner background rate, and every later post is triggered by earlier
//! posts in the same thread through an exponentially decaying kernel whose
//! strength depends on the learner's interest in the topic and on whether
//! they have already joined the thread or are being replied to directly.
//! Inference is by Gibbs sampling; fitted models rank threads for learners.

pub mod error;
pub mod forumdata;
pub mod inference;
pub mod ppcore;
pub mod recommend;
mod serde_float;
pub mod simulator;
pub mod stats;
pub mod topicmodel;

pub use error::{Error, Result};
pub use forumdata::{ForumCorpus, PostRecord, ThreadRecord};
pub use ppcore::{ExcitationClass, ModelParams};
