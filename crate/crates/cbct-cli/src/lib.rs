//! IO, file formats, checkpoint persistence and experiment harnesses for
//! the cbct reconstruction toolkit.
//!
//! Volumes (`.svol`) and sinograms (`.ssin`) share one container layout:
//! an 8-byte magic, a little-endian u32 version, a little-endian u32 text
//! header length, a `key=value` ASCII header, then a little-endian f32
//! payload in x-fastest order. Stage checkpoints (`.ckpt`) use the same
//! container with the network parameter blob as payload, and a trained run
//! is a directory of stage files plus a plain-text manifest.

pub mod checkpoint;
pub mod experiments;
pub mod formats;
pub mod geomcfg;
pub mod pgm;
pub mod rangespec;
