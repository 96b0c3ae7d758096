from .backbone import FIELD_DIM, SpectralKernel, SphericalBackbone
from .descio import load_descriptors, save_descriptors
from .losses import MarginConfig, domain_loss, view_loss
from .model import (DESCRIPTOR_DIM, PlaceDescriptorNet, describe,
                    l2_normalize)
from .vlad import VladCodebook, vlad_aggregate
