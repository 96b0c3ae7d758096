from .checkpoint import load_checkpoint, save_checkpoint, state_checksum
from .losses import (TransferLossReport, classifier_loss, gan_loss,
                     mutual_latent_loss, recon_loss, transfer_loss)
from .networks import (LatentCode, TransferNet, TransferOutput,
                       as_image_batch, transfer_forward)
