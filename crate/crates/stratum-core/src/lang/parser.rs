//! Recursive-descent parser producing a [`PipelineSpec`].
//!
//! The parser is context-free over component names: duplicate names parse
//! fine and are rejected later by validation. Everything that is locally
//! checkable (ranges, required properties, model placement) is rejected here
//! with the first offending source position.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};

/// Parses a `.stratum` source text into a [`PipelineSpec`] with all defaults
/// applied, or fails with the first offending position.
pub fn parse(source: &str) -> Result<PipelineSpec, ParseError> {
    let tokens = tokenize(source)?;
    Parser { tokens, pos: 0 }.parse_spec()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

/// A single `key: value` property occurrence with positions for reporting.
struct Prop {
    key: String,
    key_tok: Token,
    value: Value,
    value_tok: Token,
}

enum Value {
    Number { value: f64, integral: bool },
    Ident(String),
    Model(ModelRef),
}

impl Parser {
    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Token), ParseError> {
        let tok = self.advance();
        match &tok.kind {
            TokenKind::Ident(s) => Ok((s.clone(), tok.clone())),
            _ => Err(tok.error(format!("expected {what}"))),
        }
    }

    fn expect_kind(&mut self, kind: TokenKind, what: &str) -> Result<Token, ParseError> {
        let tok = self.advance();
        if tok.kind == kind {
            Ok(tok)
        } else {
            Err(tok.error(format!("expected {what}")))
        }
    }

    fn parse_spec(&mut self) -> Result<PipelineSpec, ParseError> {
        self.expect_keyword("pipeline")?;
        let (name, _) = self.expect_ident("pipeline name")?;
        self.expect_kind(TokenKind::LBrace, "'{'")?;

        let mut components = Vec::new();
        let mut flows = Vec::new();
        loop {
            let tok = self.current().clone();
            match &tok.kind {
                TokenKind::RBrace => {
                    self.advance();
                    break;
                }
                TokenKind::Ident(word) if word == "component" => {
                    self.advance();
                    components.push(self.parse_component()?);
                }
                TokenKind::Ident(word) if word == "flow" => {
                    self.advance();
                    flows.push(self.parse_flow()?);
                }
                TokenKind::Ident(word) => {
                    return Err(tok.error(format!("unknown keyword '{word}', expected 'component' or 'flow'")));
                }
                _ => return Err(tok.error("expected 'component', 'flow', or '}'")),
            }
        }
        let tok = self.current().clone();
        if tok.kind != TokenKind::Eof {
            return Err(tok.error("expected end of input after pipeline body"));
        }
        Ok(PipelineSpec {
            name,
            components,
            flows,
        })
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Token, ParseError> {
        let tok = self.advance();
        match &tok.kind {
            TokenKind::Ident(s) if s == kw => Ok(tok.clone()),
            _ => Err(tok.error(format!("expected '{kw}'"))),
        }
    }

    fn parse_props(&mut self, allowed: &[&str]) -> Result<Vec<Prop>, ParseError> {
        let mut props: Vec<Prop> = Vec::new();
        loop {
            let tok = self.current().clone();
            match &tok.kind {
                TokenKind::RBrace => {
                    self.advance();
                    return Ok(props);
                }
                TokenKind::Ident(key) => {
                    let key = key.clone();
                    let key_tok = self.advance();
                    if !allowed.contains(&key.as_str()) {
                        return Err(key_tok.error(format!("unknown property '{key}'")));
                    }
                    if props.iter().any(|p| p.key == key) {
                        return Err(key_tok.error(format!("duplicate property '{key}'")));
                    }
                    self.expect_kind(TokenKind::Colon, "':'")?;
                    let (value, value_tok) = self.parse_value()?;
                    props.push(Prop {
                        key,
                        key_tok,
                        value,
                        value_tok,
                    });
                }
                _ => return Err(tok.error("expected a property or '}'")),
            }
        }
    }

    fn parse_value(&mut self) -> Result<(Value, Token), ParseError> {
        let tok = self.advance();
        match &tok.kind {
            TokenKind::Number { value, integral } => Ok((
                Value::Number {
                    value: *value,
                    integral: *integral,
                },
                tok.clone(),
            )),
            TokenKind::Ident(s) => {
                if self.current().kind == TokenKind::At {
                    self.advance();
                    let vtok = self.advance();
                    let version = match &vtok.kind {
                        TokenKind::Ident(v) => v.clone(),
                        TokenKind::Number { value, integral: true } if *value >= 0.0 => {
                            format!("{value}")
                        }
                        _ => return Err(vtok.error("expected a model version after '@'")),
                    };
                    Ok((
                        Value::Model(ModelRef {
                            name: s.clone(),
                            version,
                        }),
                        tok.clone(),
                    ))
                } else {
                    Ok((Value::Ident(s.clone()), tok.clone()))
                }
            }
            _ => Err(tok.error("expected a property value")),
        }
    }

    fn parse_component(&mut self) -> Result<Component, ParseError> {
        let (name, name_tok) = self.expect_ident("component name")?;
        self.expect_kind(TokenKind::LBrace, "'{'")?;
        let props = self.parse_props(&[
            "kind",
            "cpu",
            "mem",
            "gpu",
            "tier_hint",
            "replicas",
            "rate",
            "service_rate",
            "model",
        ])?;

        let mut kind: Option<ComponentKind> = None;
        let mut cpu: Option<f64> = None;
        let mut mem: Option<u64> = None;
        let mut gpu = GpuRequirement::default();
        let mut tier_hint = TierHint::default();
        let mut replicas = Component::DEFAULT_REPLICAS;
        let mut rate = Component::DEFAULT_RATE;
        let mut service_rate = Component::DEFAULT_SERVICE_RATE;
        let mut model: Option<ModelRef> = None;
        let mut model_tok: Option<Token> = None;

        for p in &props {
            match p.key.as_str() {
                "kind" => {
                    kind = Some(match ident_value(p)? {
                        "ingestion" => ComponentKind::Ingestion,
                        "stream" => ComponentKind::Stream,
                        "batch" => ComponentKind::Batch,
                        "inference" => ComponentKind::Inference,
                        "visualization" => ComponentKind::Visualization,
                        other => {
                            return Err(p
                                .value_tok
                                .error(format!("unknown component kind '{other}'")))
                        }
                    });
                }
                "cpu" => cpu = Some(positive_number(p, "cpu")?),
                "mem" => mem = Some(positive_integer(p, "mem")?),
                "gpu" => {
                    gpu = match ident_value(p)? {
                        "required" => GpuRequirement::Required,
                        "none" => GpuRequirement::None,
                        other => {
                            return Err(p
                                .value_tok
                                .error(format!("gpu must be 'required' or 'none', got '{other}'")))
                        }
                    };
                }
                "tier_hint" => {
                    tier_hint = match ident_value(p)? {
                        "edge" => TierHint::Edge,
                        "fog" => TierHint::Fog,
                        "cloud" => TierHint::Cloud,
                        "any" => TierHint::Any,
                        other => {
                            return Err(p.value_tok.error(format!(
                                "tier_hint must be edge, fog, cloud, or any, got '{other}'"
                            )))
                        }
                    };
                }
                "replicas" => {
                    let n = positive_integer(p, "replicas")?;
                    replicas = u32::try_from(n)
                        .map_err(|_| p.value_tok.error("replicas out of range"))?;
                }
                "rate" => rate = non_negative_number(p, "rate")?,
                "service_rate" => service_rate = positive_number(p, "service_rate")?,
                "model" => {
                    model = Some(match &p.value {
                        Value::Model(m) => m.clone(),
                        _ => return Err(p.value_tok.error("model must be written as name@version")),
                    });
                    model_tok = Some(p.key_tok.clone());
                }
                _ => unreachable!("parse_props filtered unknown keys"),
            }
        }

        let kind = kind.ok_or_else(|| name_tok.error(format!("component '{name}' is missing required property 'kind'")))?;
        let cpu = cpu.ok_or_else(|| name_tok.error(format!("component '{name}' is missing required property 'cpu'")))?;
        let mem = mem.ok_or_else(|| name_tok.error(format!("component '{name}' is missing required property 'mem'")))?;

        match (kind, &model) {
            (ComponentKind::Inference, None) => {
                return Err(name_tok.error(format!(
                    "inference component '{name}' is missing required property 'model'"
                )));
            }
            (ComponentKind::Inference, Some(_)) => {}
            (_, Some(_)) => {
                let tok = model_tok.expect("model token recorded with model value");
                return Err(tok.error(format!(
                    "property 'model' is only allowed on inference components, and '{name}' has kind {kind}"
                )));
            }
            (_, None) => {}
        }

        Ok(Component {
            name,
            kind,
            cpu,
            mem,
            gpu,
            tier_hint,
            replicas,
            rate,
            service_rate,
            model,
        })
    }

    fn parse_flow(&mut self) -> Result<Flow, ParseError> {
        let (src, _) = self.expect_ident("flow source component")?;
        self.expect_kind(TokenKind::Arrow, "'->'")?;
        let (dst, dst_tok) = self.expect_ident("flow destination component")?;
        if src == dst {
            return Err(dst_tok.error(format!("flow source and destination must differ, got '{src}' twice")));
        }
        let mut max_latency_ms = None;
        if self.current().kind == TokenKind::LBrace {
            self.advance();
            let props = self.parse_props(&["max_latency_ms"])?;
            for p in &props {
                max_latency_ms = Some(positive_number(p, "max_latency_ms")?);
            }
        }
        Ok(Flow {
            src,
            dst,
            max_latency_ms,
        })
    }
}

fn ident_value<'p>(p: &'p Prop) -> Result<&'p str, ParseError> {
    match &p.value {
        Value::Ident(s) => Ok(s),
        _ => Err(p.value_tok.error(format!("property '{}' expects a name value", p.key))),
    }
}

fn number_value(p: &Prop) -> Result<(f64, bool), ParseError> {
    match &p.value {
        Value::Number { value, integral } => Ok((*value, *integral)),
        _ => Err(p.value_tok.error(format!("property '{}' expects a numeric value", p.key))),
    }
}

fn positive_number(p: &Prop, key: &str) -> Result<f64, ParseError> {
    let (v, _) = number_value(p)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(p.value_tok.error(format!("{key} must be greater than 0, got {v}")))
    }
}

fn non_negative_number(p: &Prop, key: &str) -> Result<f64, ParseError> {
    let (v, _) = number_value(p)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(p.value_tok.error(format!("{key} must not be negative, got {v}")))
    }
}

fn positive_integer(p: &Prop, key: &str) -> Result<u64, ParseError> {
    let (v, integral) = number_value(p)?;
    if !integral {
        return Err(p.value_tok.error(format!("{key} must be an integer, got {v}")));
    }
    if v < 1.0 {
        return Err(p.value_tok.error(format!("{key} must be at least 1, got {v}")));
    }
    Ok(v as u64)
}
