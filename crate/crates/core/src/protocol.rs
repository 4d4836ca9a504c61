//! Wire envelopes and command parsing for the JSON control protocol.
//!
//! One [`CommandEnvelope`] per text frame in, one [`ResultEnvelope`] per text
//! frame out. Vectors travel as `[x, y, z]` arrays.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::geometry::Vec3;
use crate::world::Side;

/// The eight core API functions.
pub const API_FUNCTIONS: [&str; 8] = [
    "TransformAgent",
    "TransformHands",
    "ToggleLeftGrip",
    "ToggleRightGrip",
    "ToggleLeftPoke",
    "ToggleRightPoke",
    "RequestScreenshot",
    "Reset",
];

/// Read-only query extensions; their results carry `ext: true`.
pub const EXT_FUNCTIONS: [&str; 2] = ["GetEnvInfo", "GetSemanticFrame"];

/// Session-control function used to claim a role on a server connection.
pub const SESSION_FUNCTION: &str = "Session";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEnvelope {
    pub id: i64,
    #[serde(rename = "fn")]
    pub function: String,
    #[serde(default = "empty_args")]
    pub args: Value,
}

fn empty_args() -> Value {
    json!({})
}

impl CommandEnvelope {
    pub fn new(id: i64, function: &str, args: Value) -> Self {
        CommandEnvelope {
            id,
            function: function.to_string(),
            args,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownFunction,
    BadArgs,
    /// The frame was not a JSON command envelope at all.
    BadRequest,
    ControllerTaken,
    ReadOnly,
    /// A well-formed request the simulation could not carry out.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    /// Echo of the request id; `null` only when the request could not be parsed.
    pub id: Option<i64>,
    pub status: Status,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    /// Simulation time in seconds after the command.
    pub tick: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ext: bool,
}

impl ResultEnvelope {
    pub fn ok(id: i64, payload: Value, tick: f64) -> Self {
        ResultEnvelope {
            id: Some(id),
            status: Status::Ok,
            payload,
            error: None,
            tick,
            ext: false,
        }
    }

    pub fn error(id: Option<i64>, code: ErrorCode, message: impl Into<String>, tick: f64) -> Self {
        ResultEnvelope {
            id,
            status: Status::Error,
            payload: json!({}),
            error: Some(ErrorBody {
                code,
                message: message.into(),
            }),
            tick,
            ext: false,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.error.as_ref().map(|e| e.code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Controller,
    Observer,
}

/// Arguments of `Reset`. `task` is either a task id known to the server or an
/// inline task object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetArgs {
    #[serde(default)]
    pub layout: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub task: Option<Value>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentArgs {
    #[serde(rename = "T", default)]
    t: Option<Vec3>,
    #[serde(rename = "R", default)]
    r: Option<Vec3>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HandsArgs {
    #[serde(rename = "leftT", default)]
    left_t: Option<Vec3>,
    #[serde(rename = "leftR", default)]
    left_r: Option<Vec3>,
    #[serde(rename = "rightT", default)]
    right_t: Option<Vec3>,
    #[serde(rename = "rightR", default)]
    right_r: Option<Vec3>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionArgs {
    role: Role,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoArgs {}

/// A parsed, validated command.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    TransformAgent { t: Vec3, r: Vec3 },
    TransformHands { left_t: Vec3, left_r: Vec3, right_t: Vec3, right_r: Vec3 },
    ToggleGrip(Side),
    TogglePoke(Side),
    RequestScreenshot,
    Reset(ResetArgs),
    GetEnvInfo,
    GetSemanticFrame,
    Session(Role),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub code: ErrorCode,
    pub message: String,
}

fn bad_args(function: &str, e: impl std::fmt::Display) -> ParseError {
    ParseError {
        code: ErrorCode::BadArgs,
        message: format!("{function}: {e}"),
    }
}

fn finite(function: &str, vs: &[Vec3]) -> Result<(), ParseError> {
    if vs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(bad_args(function, "vector components must be finite"))
    }
}

impl Command {
    pub fn parse(function: &str, args: &Value) -> Result<Command, ParseError> {
        let args = if args.is_null() { &Value::Object(Default::default()) } else { args };
        match function {
            "TransformAgent" => {
                let a: AgentArgs = serde_json::from_value(args.clone()).map_err(|e| bad_args(function, e))?;
                let (t, r) = (a.t.unwrap_or(Vec3::ZERO), a.r.unwrap_or(Vec3::ZERO));
                finite(function, &[t, r])?;
                Ok(Command::TransformAgent { t, r })
            }
            "TransformHands" => {
                let a: HandsArgs = serde_json::from_value(args.clone()).map_err(|e| bad_args(function, e))?;
                let v = [a.left_t, a.left_r, a.right_t, a.right_r].map(|x| x.unwrap_or(Vec3::ZERO));
                finite(function, &v)?;
                Ok(Command::TransformHands {
                    left_t: v[0],
                    left_r: v[1],
                    right_t: v[2],
                    right_r: v[3],
                })
            }
            "ToggleLeftGrip" | "ToggleRightGrip" | "ToggleLeftPoke" | "ToggleRightPoke" | "RequestScreenshot"
            | "GetEnvInfo" | "GetSemanticFrame" => {
                let _: NoArgs = serde_json::from_value(args.clone()).map_err(|e| bad_args(function, e))?;
                Ok(match function {
                    "ToggleLeftGrip" => Command::ToggleGrip(Side::Left),
                    "ToggleRightGrip" => Command::ToggleGrip(Side::Right),
                    "ToggleLeftPoke" => Command::TogglePoke(Side::Left),
                    "ToggleRightPoke" => Command::TogglePoke(Side::Right),
                    "RequestScreenshot" => Command::RequestScreenshot,
                    "GetEnvInfo" => Command::GetEnvInfo,
                    _ => Command::GetSemanticFrame,
                })
            }
            "Reset" => {
                let a: ResetArgs = serde_json::from_value(args.clone()).map_err(|e| bad_args(function, e))?;
                Ok(Command::Reset(a))
            }
            SESSION_FUNCTION => {
                let a: SessionArgs = serde_json::from_value(args.clone()).map_err(|e| bad_args(function, e))?;
                Ok(Command::Session(a.role))
            }
            other => Err(ParseError {
                code: ErrorCode::UnknownFunction,
                message: format!("unknown function {other:?}"),
            }),
        }
    }

    /// Commands that change the world (and, except `Reset`, advance the clock).
    pub fn is_mutating(&self) -> bool {
        matches!(
            self,
            Command::TransformAgent { .. }
                | Command::TransformHands { .. }
                | Command::ToggleGrip(_)
                | Command::TogglePoke(_)
                | Command::Reset(_)
        )
    }

    pub fn is_extension(&self) -> bool {
        matches!(self, Command::GetEnvInfo | Command::GetSemanticFrame)
    }
}

/// Builders for client-side envelopes.
pub mod build {
    use super::*;

    fn v(x: Vec3) -> Value {
        json!([x.x, x.y, x.z])
    }

    pub fn transform_agent(id: i64, t: Vec3, r: Vec3) -> CommandEnvelope {
        CommandEnvelope::new(id, "TransformAgent", json!({"T": v(t), "R": v(r)}))
    }

    pub fn transform_hands(id: i64, left_t: Vec3, left_r: Vec3, right_t: Vec3, right_r: Vec3) -> CommandEnvelope {
        CommandEnvelope::new(
            id,
            "TransformHands",
            json!({"leftT": v(left_t), "leftR": v(left_r), "rightT": v(right_t), "rightR": v(right_r)}),
        )
    }

    pub fn toggle_grip(id: i64, side: Side) -> CommandEnvelope {
        let f = match side {
            Side::Left => "ToggleLeftGrip",
            Side::Right => "ToggleRightGrip",
        };
        CommandEnvelope::new(id, f, json!({}))
    }

    pub fn toggle_poke(id: i64, side: Side) -> CommandEnvelope {
        let f = match side {
            Side::Left => "ToggleLeftPoke",
            Side::Right => "ToggleRightPoke",
        };
        CommandEnvelope::new(id, f, json!({}))
    }

    pub fn reset(id: i64, layout: u32, seed: u64, task: Option<Value>) -> CommandEnvelope {
        let mut args = json!({"layout": layout, "seed": seed});
        if let Some(t) = task {
            args["task"] = t;
        }
        CommandEnvelope::new(id, "Reset", args)
    }

    pub fn session(id: i64, role: Role) -> CommandEnvelope {
        CommandEnvelope::new(id, SESSION_FUNCTION, json!({ "role": role }))
    }

    pub fn simple(id: i64, function: &str) -> CommandEnvelope {
        CommandEnvelope::new(id, function, json!({}))
    }
}
