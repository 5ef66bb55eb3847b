"""Latent diffusion model wrapper.

Everything torch lives behind this module so the server and the mock
run without it. The wrapper owns latent-space conversion: predict_noise
takes a pixel-space array and returns a pixel-space prediction, going
image -> latent -> UNet -> predicted clean latent -> decoded clean
image -> pixel-space noise, so the client never sees a latent unless it
asks for one through the encode op.

Set SPLATBRIDGE_CACHE to steer where checkpoints land.
"""

import os

import numpy as np

DEFAULT_MODEL = "stabilityai/stable-diffusion-2-1-base"


class DiffusionModel:
    def __init__(self, model_id: str = DEFAULT_MODEL, device: str = None):
        import torch
        from diffusers import StableDiffusionPipeline

        self._torch = torch
        if device is None:
            device = "cuda" if torch.cuda.is_available() else "cpu"
        self.device = device
        # half precision on accelerators; CPU kernels want f32
        dtype = torch.float16 if device != "cpu" else torch.float32
        pipe = StableDiffusionPipeline.from_pretrained(
            model_id, torch_dtype=dtype,
            cache_dir=os.environ.get("SPLATBRIDGE_CACHE") or None,
            safety_checker=None, requires_safety_checker=False)
        pipe.to(device)
        self.name = model_id
        self.vae = pipe.vae
        self.unet = pipe.unet
        self.tokenizer = pipe.tokenizer
        self.text_encoder = pipe.text_encoder
        self.dtype = dtype
        ab = pipe.scheduler.alphas_cumprod
        self.alpha_bar = ab.to("cpu", torch.float64).numpy()
        self._embeddings = {}

    @property
    def total_steps(self) -> int:
        return self.alpha_bar.shape[0]

    def _embed(self, prompt: str):
        torch = self._torch
        if prompt not in self._embeddings:
            tokens = self.tokenizer(
                prompt, padding="max_length",
                max_length=self.tokenizer.model_max_length,
                truncation=True, return_tensors="pt")
            with torch.no_grad():
                emb = self.text_encoder(tokens.input_ids.to(self.device))[0]
            self._embeddings[prompt] = emb.to(self.dtype)
        return self._embeddings[prompt]

    def _to_tensor(self, arr: np.ndarray):
        torch = self._torch
        t = torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))
        return t.to(self.device, self.dtype)

    def encode(self, image: np.ndarray) -> np.ndarray:
        """(H, W, 3) in [0, 1] -> (h, w, 4) latent."""
        torch = self._torch
        x = self._to_tensor(image).permute(2, 0, 1)[None] * 2 - 1
        with torch.no_grad():
            lat = self.vae.encode(x).latent_dist.mean
        lat = lat * self.vae.config.scaling_factor
        return lat[0].permute(1, 2, 0).to("cpu", torch.float32).numpy()

    def decode(self, latent: np.ndarray) -> np.ndarray:
        torch = self._torch
        lat = self._to_tensor(latent).permute(2, 0, 1)[None]
        lat = lat / self.vae.config.scaling_factor
        with torch.no_grad():
            img = self.vae.decode(lat).sample
        img = (img / 2 + 0.5).clamp(0, 1)
        return img[0].permute(1, 2, 0).to("cpu", torch.float32).numpy()

    def _unet_eps(self, lat, t: int, prompt: str, cfg: float):
        torch = self._torch
        timestep = torch.tensor([t], device=self.device)
        cond = self._embed(prompt)
        with torch.no_grad():
            if cfg == 1.0:
                return self.unet(lat, timestep,
                                 encoder_hidden_states=cond).sample
            uncond = self._embed("")
            both = torch.cat([lat, lat])
            emb = torch.cat([uncond, cond])
            eps = self.unet(both, timestep.repeat(2),
                            encoder_hidden_states=emb).sample
            e_un, e_c = eps.chunk(2)
            return e_un + cfg * (e_c - e_un)

    def predict_noise(self, x: np.ndarray, t: int, prompt: str = "",
                      cfg: float = 1.0) -> np.ndarray:
        torch = self._torch
        t = int(t)
        ab = float(self.alpha_bar[t])
        lat = self._to_tensor(self.encode(x)).permute(2, 0, 1)[None]
        eps_lat = self._unet_eps(lat, t, prompt, cfg)
        # predicted clean latent, decoded, then re-expressed as the
        # pixel-space noise that explains the input under the schedule
        x0_lat = (lat - np.sqrt(1 - ab) * eps_lat) / np.sqrt(ab)
        x0_pix = self.decode(
            x0_lat[0].permute(1, 2, 0).to("cpu", torch.float32).numpy())
        x64 = np.asarray(x, dtype=np.float64)
        return (x64 - np.sqrt(ab) * x0_pix) / np.sqrt(1 - ab)
