//! Plain-text task-set files.
//!
//! ```text
//! # comment
//! 3 2 implicit
//! 0.5 10 10
//! 3 10 10
//! 4 10 10
//! ```
//!
//! The header is `n m deadline_model`, followed by one `C T D` line per task.
//! Tasks are numbered from 1 in file order.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::{DeadlineModel, ModelError, Task, TaskSet};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Model {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A task set together with the platform size recorded in its header.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSetFile {
    pub m: usize,
    pub set: TaskSet,
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        msg: msg.into(),
    }
}

pub fn parse(text: &str) -> Result<TaskSetFile, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| syntax(1, "missing header `n m deadline_model`"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [n, m, model] = fields[..] else {
        return Err(syntax(hline, "header must be `n m deadline_model`"));
    };
    let n: usize = n
        .parse()
        .map_err(|_| syntax(hline, format!("bad task count `{n}`")))?;
    let m: usize = m
        .parse()
        .ok()
        .filter(|&m| m > 0)
        .ok_or_else(|| syntax(hline, format!("bad processor count `{m}`")))?;
    let model: DeadlineModel = model.parse().map_err(|e: String| syntax(hline, e))?;

    let mut set = TaskSet::empty(model);
    let mut last = hline;
    for (line, text) in lines {
        last = line;
        let nums: Vec<f64> = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| syntax(line, format!("bad number `{tok}`")))
            })
            .collect::<Result<_, _>>()?;
        let [c, t, d] = nums[..] else {
            return Err(syntax(line, "task line must be `C T D`"));
        };
        if set.len() == n {
            return Err(syntax(line, format!("more than {n} task lines")));
        }
        set.push(Task::new(set.len() + 1, c, t, d))
            .map_err(|source| FormatError::Model { line, source })?;
    }
    if set.len() != n {
        return Err(syntax(
            last,
            format!("header declares {n} tasks, found {}", set.len()),
        ));
    }
    Ok(TaskSetFile { m, set })
}

pub fn render(set: &TaskSet, m: usize) -> String {
    let mut out = format!("{} {} {}\n", set.len(), m, set.model());
    for t in set.tasks() {
        // `Display` for f64 is the shortest round-tripping decimal form.
        let _ = writeln!(out, "{} {} {}", t.wcet, t.period, t.deadline);
    }
    out
}

pub fn read(path: &Path) -> Result<TaskSetFile, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

pub fn write(path: &Path, set: &TaskSet, m: usize) -> Result<(), FormatError> {
    std::fs::write(path, render(set, m)).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}
