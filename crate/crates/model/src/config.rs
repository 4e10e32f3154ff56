use std::fmt;
use std::str::FromStr;

use ddz_core::encoding::{BID_ROWS, PART_B_WIDTH, PLAY_ROWS, WIDTH};
use ddz_core::Role;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetKind {
    Card,
    Bid,
}

/// The six decision points, each with its own network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Position {
    FirstBidder,
    SecondBidder,
    ThirdBidder,
    Landlord,
    LandlordDown,
    LandlordUp,
}

impl Position {
    pub const ALL: [Position; 6] = [
        Position::FirstBidder,
        Position::SecondBidder,
        Position::ThirdBidder,
        Position::Landlord,
        Position::LandlordDown,
        Position::LandlordUp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn kind(self) -> NetKind {
        if self.index() < 3 {
            NetKind::Bid
        } else {
            NetKind::Card
        }
    }

    pub fn bidder(seat: usize) -> Position {
        Position::ALL[seat.min(2)]
    }

    pub fn from_role(role: Role) -> Position {
        match role {
            Role::Landlord => Position::Landlord,
            Role::PeasantDown => Position::LandlordDown,
            Role::PeasantUp => Position::LandlordUp,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Position::FirstBidder => "first_bidder",
            Position::SecondBidder => "second_bidder",
            Position::ThirdBidder => "third_bidder",
            Position::Landlord => "landlord",
            Position::LandlordDown => "landlord_down",
            Position::LandlordUp => "landlord_up",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Position {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Position::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown position \"{s}\"")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageSpec {
    pub channels: usize,
    pub blocks: usize,
}

/// Network shape. Each stage halves the length (54 → 27 → 14 → 7) in its
/// first block; the flattened trunk output, concatenated with `part_b`
/// repeated `part_b_repeat` times, feeds the fully connected layers and a
/// 3-wide output `(p, Q_w, Q_l)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetConfig {
    pub kind: NetKind,
    pub input_channels: usize,
    pub input_width: usize,
    pub stages: Vec<StageSpec>,
    pub part_b_width: usize,
    pub part_b_repeat: usize,
    pub hidden: Vec<usize>,
}

pub const OUTPUTS: usize = 3;

pub(crate) fn downsampled(len: usize) -> usize {
    (len - 1) / 2 + 1
}

impl NetConfig {
    /// Full-size cardplay network.
    pub fn card_full() -> Self {
        NetConfig {
            kind: NetKind::Card,
            input_channels: PLAY_ROWS,
            input_width: WIDTH,
            stages: vec![
                StageSpec { channels: 72, blocks: 3 },
                StageSpec { channels: 144, blocks: 3 },
                StageSpec { channels: 288, blocks: 3 },
            ],
            part_b_width: PART_B_WIDTH,
            part_b_repeat: 4,
            hidden: vec![2048, 512, 128],
        }
    }

    /// Full-size bidding network.
    pub fn bid_full() -> Self {
        NetConfig {
            kind: NetKind::Bid,
            input_channels: BID_ROWS,
            input_width: WIDTH,
            stages: vec![
                StageSpec { channels: 5, blocks: 3 },
                StageSpec { channels: 10, blocks: 3 },
                StageSpec { channels: 20, blocks: 3 },
            ],
            part_b_width: 0,
            part_b_repeat: 4,
            hidden: vec![256, 256, 128],
        }
    }

    /// Same topology, narrow enough to train on one CPU core.
    pub fn card_desk() -> Self {
        NetConfig {
            stages: vec![
                StageSpec { channels: 16, blocks: 1 },
                StageSpec { channels: 32, blocks: 1 },
                StageSpec { channels: 32, blocks: 1 },
            ],
            hidden: vec![256, 64],
            ..NetConfig::card_full()
        }
    }

    pub fn bid_desk() -> Self {
        NetConfig {
            stages: vec![
                StageSpec { channels: 5, blocks: 1 },
                StageSpec { channels: 10, blocks: 1 },
                StageSpec { channels: 20, blocks: 1 },
            ],
            hidden: vec![64, 32],
            ..NetConfig::bid_full()
        }
    }

    /// `(channels, length)` after each stage, starting with the input.
    pub fn stage_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.input_channels, self.input_width)];
        let mut len = self.input_width;
        for s in &self.stages {
            len = downsampled(len);
            shapes.push((s.channels, len));
        }
        shapes
    }

    pub fn flatten_width(&self) -> usize {
        let (c, l) = *self.stage_shapes().last().expect("input shape");
        c * l
    }

    pub fn head_input_width(&self) -> usize {
        self.flatten_width() + self.part_b_width * self.part_b_repeat
    }

    pub fn slice_len(&self) -> usize {
        self.input_channels * self.input_width
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() || self.stages.iter().any(|s| s.channels == 0 || s.blocks == 0) {
            return Err(ModelError::Config("every stage needs channels and at least one block".into()));
        }
        if self.input_channels == 0 || self.input_width < 2 || self.hidden.contains(&0) {
            return Err(ModelError::Config("zero-sized layer".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_widths() {
        let card = NetConfig::card_full();
        assert_eq!(card.stage_shapes(), vec![(72, 54), (72, 27), (144, 14), (288, 7)]);
        assert_eq!(card.flatten_width(), 2016);
        assert_eq!(card.part_b_width * card.part_b_repeat, 72);
        assert_eq!(card.head_input_width(), 2088);

        let bid = NetConfig::bid_full();
        assert_eq!(bid.stage_shapes(), vec![(5, 54), (5, 27), (10, 14), (20, 7)]);
        assert_eq!(bid.head_input_width(), 140);
    }

    #[test]
    fn positions() {
        for p in Position::ALL {
            assert_eq!(p.name().parse::<Position>().unwrap(), p);
        }
        assert_eq!(Position::bidder(2), Position::ThirdBidder);
        assert_eq!(Position::from_role(Role::PeasantUp).kind(), NetKind::Card);
    }
}
