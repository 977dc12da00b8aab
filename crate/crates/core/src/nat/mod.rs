//! Toy non-autoregressive translator: a conditional masked LM with length
//! prediction, mask-predict decoding, the joint encoder/decoder attack and
//! adversarial fine-tuning, plus corpus BLEU.

mod advtrain;
mod attack;
mod bleu;
mod decode;
mod masked;
mod model;
mod train;

pub use advtrain::{
    bleu_report, bleu_under_attack, corpus_bleu, decode_pair_under_attack, generate_nat_adv_set, nat_adv_finetune,
    nat_adv_instance, BleuReport, NatAdvConfig,
};
pub use attack::{masked_loss, nat_attack, NatAttackConfig, NatAttackResult, Side};
pub use bleu::bleu;
pub use decode::{argmax_content, decode_with_length, mask_predict_decode, remask_count};
pub use masked::MaskedTarget;
pub use model::{masked_loss_from_logits, NatCache, NatConfig, NatObjective, Seq2SeqModel};
pub use train::{masked_token_accuracy, nat_continue_training, nat_train, NatInstance, NatTrainConfig, NatTrainStats};
