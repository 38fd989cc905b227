//! Reader and canonical writer for the BIF network interchange subset:
//! `network`, `variable` with `type discrete`, and `probability` blocks with
//! `table` or per-configuration entries.

use std::collections::BTreeSet;
use std::collections::HashMap;

use thiserror::Error;

use crate::graphlib::Dag;

use super::{config_count, Cpt, DiscreteBayesNet};

#[derive(Debug, Error)]
pub enum BifError {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("node {node}: cpt row {row} sums to {sum}, beyond repair tolerance")]
    RowSum { node: String, row: usize, sum: f64 },
    #[error("node {node}: {msg}")]
    Table { node: String, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    line: usize,
    col: usize,
}

const PUNCT: &[char] = &['{', '}', '(', ')', '[', ']', '|', ',', ';'];

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = match line.find("//") {
            Some(pos) => &line[..pos],
            None => line,
        };
        let mut word = String::new();
        let mut word_col = 0;
        for (ci, ch) in line.chars().enumerate() {
            if ch.is_whitespace() || PUNCT.contains(&ch) {
                if !word.is_empty() {
                    tokens.push(Token {
                        text: std::mem::take(&mut word),
                        line: li + 1,
                        col: word_col + 1,
                    });
                }
                if PUNCT.contains(&ch) {
                    tokens.push(Token {
                        text: ch.to_string(),
                        line: li + 1,
                        col: ci + 1,
                    });
                }
            } else {
                if word.is_empty() {
                    word_col = ci;
                }
                word.push(ch);
            }
        }
        if !word.is_empty() {
            tokens.push(Token {
                text: word,
                line: li + 1,
                col: word_col + 1,
            });
        }
    }
    tokens
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> BifError {
        let (line, col) = self
            .tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|t| (t.line, t.col))
            .unwrap_or((0, 0));
        BifError::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|t| t.text.as_str())
    }

    fn next(&mut self) -> Result<&Token, BifError> {
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| self.err_eof("unexpected end of input"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn err_eof(&self, msg: &str) -> BifError {
        let (line, col) = self
            .tokens
            .last()
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1));
        BifError::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, want: &str) -> Result<(), BifError> {
        let got = self.next()?.text.clone();
        if got == want {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.err(format!("expected {want:?}, found {got:?}")))
        }
    }

    /// Skips a balanced `{ ... }` block; assumes the `{` was not yet consumed.
    fn skip_block(&mut self) -> Result<(), BifError> {
        self.expect("{")?;
        let mut depth = 1;
        while depth > 0 {
            match self.next()?.text.as_str() {
                "{" => depth += 1,
                "}" => depth -= 1,
                _ => {}
            }
        }
        Ok(())
    }

    /// Consumes tokens through the terminating `;`.
    fn skip_statement(&mut self) -> Result<(), BifError> {
        loop {
            if self.next()?.text == ";" {
                return Ok(());
            }
        }
    }
}

#[derive(Debug)]
struct VariableDecl {
    name: String,
    values: Vec<String>,
}

#[derive(Debug)]
enum CptEntry {
    Table(Vec<f64>),
    Config(Vec<String>, Vec<f64>),
}

#[derive(Debug)]
struct ProbabilityDecl {
    child: String,
    parents: Vec<String>,
    entries: Vec<CptEntry>,
}

fn parse_number(tok: &Token) -> Result<f64, BifError> {
    tok.text.parse::<f64>().map_err(|_| BifError::Parse {
        line: tok.line,
        col: tok.col,
        msg: format!("expected a number, found {:?}", tok.text),
    })
}

fn parse_variable(p: &mut Parser) -> Result<VariableDecl, BifError> {
    let name = p.next()?.text.clone();
    p.expect("{")?;
    let mut values = Vec::new();
    loop {
        match p.peek() {
            Some("}") => {
                p.next()?;
                break;
            }
            Some("type") => {
                p.next()?;
                p.expect("discrete")?;
                p.expect("[")?;
                let card_tok = p.next()?.clone();
                let card: usize = card_tok.text.parse().map_err(|_| BifError::Parse {
                    line: card_tok.line,
                    col: card_tok.col,
                    msg: "expected a cardinality".into(),
                })?;
                p.expect("]")?;
                p.expect("{")?;
                loop {
                    let tok = p.next()?.text.clone();
                    match tok.as_str() {
                        "}" => break,
                        "," => {}
                        v => values.push(v.to_string()),
                    }
                }
                p.expect(";")?;
                if values.len() != card {
                    return Err(p.err(format!(
                        "variable {name}: {card} values declared, {} listed",
                        values.len()
                    )));
                }
            }
            Some("property") => {
                p.next()?;
                p.skip_statement()?;
            }
            Some(_) => return Err(p.err("unexpected token in variable block")),
            None => return Err(p.err_eof("unterminated variable block")),
        }
    }
    if values.len() < 2 {
        return Err(p.err(format!("variable {name} needs at least 2 values")));
    }
    Ok(VariableDecl { name, values })
}

fn parse_probability(p: &mut Parser) -> Result<ProbabilityDecl, BifError> {
    p.expect("(")?;
    let child = p.next()?.text.clone();
    let mut parents = Vec::new();
    loop {
        let tok = p.next()?.text.clone();
        match tok.as_str() {
            ")" => break,
            "|" | "," => {}
            name => parents.push(name.to_string()),
        }
    }
    p.expect("{")?;
    let mut entries = Vec::new();
    loop {
        match p.peek() {
            Some("}") => {
                p.next()?;
                break;
            }
            Some("table") => {
                p.next()?;
                let mut probs = Vec::new();
                loop {
                    let tok = p.next()?.clone();
                    match tok.text.as_str() {
                        ";" => break,
                        "," => {}
                        _ => probs.push(parse_number(&tok)?),
                    }
                }
                entries.push(CptEntry::Table(probs));
            }
            Some("(") => {
                p.next()?;
                let mut cfg = Vec::new();
                loop {
                    let tok = p.next()?.text.clone();
                    match tok.as_str() {
                        ")" => break,
                        "," => {}
                        v => cfg.push(v.to_string()),
                    }
                }
                let mut probs = Vec::new();
                loop {
                    let tok = p.next()?.clone();
                    match tok.text.as_str() {
                        ";" => break,
                        "," => {}
                        _ => probs.push(parse_number(&tok)?),
                    }
                }
                entries.push(CptEntry::Config(cfg, probs));
            }
            Some("property") => {
                p.next()?;
                p.skip_statement()?;
            }
            Some(_) => return Err(p.err("unexpected token in probability block")),
            None => return Err(p.err_eof("unterminated probability block")),
        }
    }
    Ok(ProbabilityDecl {
        child,
        parents,
        entries,
    })
}

/// Renormalizes a row whose sum is within `1e-6` of one; rejects anything
/// farther off.
fn repair_row(node: &str, row_idx: usize, row: &mut [f64]) -> Result<(), BifError> {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < -1e-9) {
        return Err(BifError::RowSum {
            node: node.to_string(),
            row: row_idx,
            sum,
        });
    }
    if (sum - 1.0).abs() > 1e-12 {
        for p in row.iter_mut() {
            *p = p.max(0.0) / sum;
        }
    }
    Ok(())
}

/// Parses BIF text into a network. Variable order follows declaration order;
/// rows off unit mass by at most `1e-6` are renormalized.
pub fn parse_bif(text: &str) -> Result<DiscreteBayesNet, BifError> {
    let mut p = Parser {
        tokens: tokenize(text),
        pos: 0,
    };
    let mut variables: Vec<VariableDecl> = Vec::new();
    let mut probabilities: Vec<ProbabilityDecl> = Vec::new();
    while p.peek().is_some() {
        let tok = p.next()?.text.clone();
        match tok.as_str() {
            "network" => {
                // Name tokens up to the block.
                while p.peek() != Some("{") && p.peek().is_some() {
                    p.next()?;
                }
                p.skip_block()?;
            }
            "variable" => variables.push(parse_variable(&mut p)?),
            "probability" => probabilities.push(parse_probability(&mut p)?),
            other => return Err(p.err(format!("unexpected top-level token {other:?}"))),
        }
    }

    let index: HashMap<&str, usize> = variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    if index.len() != variables.len() {
        return Err(BifError::Parse {
            line: 0,
            col: 0,
            msg: "duplicate variable name".into(),
        });
    }
    let n = variables.len();
    let cards: Vec<usize> = variables.iter().map(|v| v.values.len()).collect();
    let mut dag = Dag::new(n);
    let mut cpts: Vec<Option<Cpt>> = vec![None; n];

    for decl in &probabilities {
        let child = *index.get(decl.child.as_str()).ok_or_else(|| BifError::Table {
            node: decl.child.clone(),
            msg: "probability block for undeclared variable".into(),
        })?;
        let mut parent_ids = Vec::with_capacity(decl.parents.len());
        for pname in &decl.parents {
            parent_ids.push(*index.get(pname.as_str()).ok_or_else(|| BifError::Table {
                node: decl.child.clone(),
                msg: format!("undeclared parent {pname}"),
            })?);
        }
        for &pid in &parent_ids {
            dag.add_edge(pid, child);
        }
        let sorted_parents: BTreeSet<usize> = parent_ids.iter().copied().collect();
        if sorted_parents.len() != parent_ids.len() {
            return Err(BifError::Table {
                node: decl.child.clone(),
                msg: "repeated parent".into(),
            });
        }
        let n_cfg = config_count(&sorted_parents, &cards);
        let card = cards[child];
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; n_cfg];

        // Row index in canonical order (ascending parent ids, last fastest)
        // for a configuration given in declared-parent order.
        let canonical_row = |declared_vals: &[usize]| -> usize {
            let mut idx = 0;
            for &pid in &sorted_parents {
                let pos = parent_ids.iter().position(|&q| q == pid).unwrap();
                idx = idx * cards[pid] + declared_vals[pos];
            }
            idx
        };

        for entry in &decl.entries {
            match entry {
                CptEntry::Table(probs) => {
                    if probs.len() != n_cfg * card {
                        return Err(BifError::Table {
                            node: decl.child.clone(),
                            msg: format!(
                                "table lists {} values, expected {}",
                                probs.len(),
                                n_cfg * card
                            ),
                        });
                    }
                    // Declared-parent configurations, last parent fastest,
                    // child values contiguous within a configuration.
                    let mut declared_vals = vec![0usize; parent_ids.len()];
                    for cfg in 0..n_cfg {
                        let mut rem = cfg;
                        for (slot, &pid) in parent_ids.iter().enumerate().rev() {
                            declared_vals[slot] = rem % cards[pid];
                            rem /= cards[pid];
                        }
                        let row = probs[cfg * card..(cfg + 1) * card].to_vec();
                        rows[canonical_row(&declared_vals)] = Some(row);
                    }
                }
                CptEntry::Config(names, probs) => {
                    if names.len() != parent_ids.len() {
                        return Err(BifError::Table {
                            node: decl.child.clone(),
                            msg: "configuration arity mismatch".into(),
                        });
                    }
                    if probs.len() != card {
                        return Err(BifError::Table {
                            node: decl.child.clone(),
                            msg: format!("row lists {} values, expected {card}", probs.len()),
                        });
                    }
                    let mut declared_vals = Vec::with_capacity(names.len());
                    for (slot, vname) in names.iter().enumerate() {
                        let pid = parent_ids[slot];
                        let val = variables[pid]
                            .values
                            .iter()
                            .position(|v| v == vname)
                            .ok_or_else(|| BifError::Table {
                                node: decl.child.clone(),
                                msg: format!("unknown value {vname} for parent"),
                            })?;
                        declared_vals.push(val);
                    }
                    let slot = canonical_row(&declared_vals);
                    if rows[slot].is_some() {
                        return Err(BifError::Table {
                            node: decl.child.clone(),
                            msg: "duplicate configuration entry".into(),
                        });
                    }
                    rows[slot] = Some(probs.clone());
                }
            }
        }

        let mut table = Vec::with_capacity(n_cfg);
        for (r, row) in rows.into_iter().enumerate() {
            let mut row = row.ok_or_else(|| BifError::Table {
                node: decl.child.clone(),
                msg: format!("missing configuration {r}"),
            })?;
            repair_row(&decl.child, r, &mut row)?;
            table.push(row);
        }
        cpts[child] = Some(Cpt { rows: table });
    }

    let mut final_cpts = Vec::with_capacity(n);
    for (i, cpt) in cpts.into_iter().enumerate() {
        final_cpts.push(cpt.ok_or_else(|| BifError::Table {
            node: variables[i].name.clone(),
            msg: "no probability block".into(),
        })?);
    }
    let net = DiscreteBayesNet {
        nodes: variables.into_iter().map(|v| v.name).collect(),
        cards,
        dag,
        cpts: final_cpts,
    };
    net.validate().map_err(|e| BifError::Table {
        node: "network".into(),
        msg: e.to_string(),
    })?;
    Ok(net)
}

/// Canonical BIF text: parents ascending, configurations in mixed-radix
/// order, synthetic `s0..` state names.
pub fn serialize(net: &DiscreteBayesNet) -> String {
    let mut s = String::from("network net {\n}\n");
    for (i, name) in net.nodes.iter().enumerate() {
        let values: Vec<String> = (0..net.cards[i]).map(|v| format!("s{v}")).collect();
        s.push_str(&format!(
            "variable {name} {{\n  type discrete [ {} ] {{ {} }};\n}}\n",
            net.cards[i],
            values.join(", ")
        ));
    }
    for (i, name) in net.nodes.iter().enumerate() {
        let parents: Vec<usize> = net.dag.parents_of(i).iter().copied().collect();
        if parents.is_empty() {
            let row: Vec<String> = net.cpts[i].rows[0].iter().map(|p| format!("{p}")).collect();
            s.push_str(&format!(
                "probability ( {name} ) {{\n  table {};\n}}\n",
                row.join(", ")
            ));
        } else {
            let pnames: Vec<&str> = parents.iter().map(|&p| net.nodes[p].as_str()).collect();
            s.push_str(&format!(
                "probability ( {name} | {} ) {{\n",
                pnames.join(", ")
            ));
            for (cfg, row) in net.cpts[i].rows.iter().enumerate() {
                let mut vals = vec![0usize; parents.len()];
                let mut rem = cfg;
                for (slot, &p) in parents.iter().enumerate().rev() {
                    vals[slot] = rem % net.cards[p];
                    rem /= net.cards[p];
                }
                let cfg_names: Vec<String> = vals.iter().map(|v| format!("s{v}")).collect();
                let probs: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
                s.push_str(&format!(
                    "  ({}) {};\n",
                    cfg_names.join(", "),
                    probs.join(", ")
                ));
            }
            s.push_str("}\n");
        }
    }
    s
}
