from .schedule import NoiseSchedule
from .updates import (GuidanceUpdate, add_noise, cfg_combine, ddim_forward,
                      ddim_invert, ddim_step, ism_update, sds_update)
from .providers import (ConstantOffsetProvider, GaussianToyProvider,
                        PhotometricOracle, PointMassProvider, ScoreProvider,
                        ScoreRequest, ScoreResponse)
from .resample import downsample_area, upsample_transpose
from .remote import (RemoteProviderError, RemoteScoreProvider,
                     image_to_payload, payload_length, payload_to_image,
                     read_frame, write_frame)

__all__ = [
    "ConstantOffsetProvider", "GaussianToyProvider", "GuidanceUpdate",
    "NoiseSchedule", "PhotometricOracle", "PointMassProvider",
    "RemoteProviderError", "RemoteScoreProvider", "ScoreProvider",
    "ScoreRequest", "ScoreResponse", "add_noise", "cfg_combine",
    "ddim_forward", "ddim_invert", "ddim_step", "downsample_area",
    "image_to_payload", "ism_update", "payload_length", "payload_to_image",
    "read_frame", "sds_update", "upsample_transpose", "write_frame",
]
