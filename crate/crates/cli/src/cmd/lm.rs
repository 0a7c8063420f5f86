use anyhow::Result;
use finchat_core::harness::generate_reply;
use finchat_core::knowledge::AugmentedPrompt;
use finchat_core::tinylm::Sampler;

use super::{train, Ctx};
use crate::LmCmd;

pub fn run(ctx: &mut Ctx, cmd: LmCmd) -> Result<()> {
    match cmd {
        LmCmd::TrainSft(args) => train::sft(ctx, args),
        LmCmd::Sample { checkpoint, prompt, sampling } => {
            let config = ctx.sampler(&sampling)?;
            let checkpoint = ctx.checkpoint(checkpoint)?;
            let mut sampler = Sampler::new(config)?;
            let prompt = AugmentedPrompt { text: prompt, knowledge: None };
            let room = ctx.config.eval.generation_room;
            println!("{}", generate_reply(&checkpoint, &prompt, &mut sampler, room)?);
            Ok(())
        }
    }
}
