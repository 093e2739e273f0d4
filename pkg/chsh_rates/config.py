import os
from pydantic import BaseModel
from dotenv import load_dotenv

load_dotenv()  # load from .env if present

class Settings(BaseModel):
    app_env: str = os.getenv("APP_ENV", "development")
    log_dir: str = os.getenv("CHSH_LOG_DIR", "logs")
    log_level: str = os.getenv("CHSH_LOG_LEVEL", "INFO")
    default_seed: int = int(os.getenv("CHSH_SEED", "20190101"))
    default_restarts: int = int(os.getenv("CHSH_RESTARTS", "10000"))
    threads: int = int(os.getenv("CHSH_THREADS", "1"))
    grid_points: int = int(os.getenv("CHSH_GRID_POINTS", "60"))
    # additive constant in the extractor loss 2*log(1/eps_ext) + c
    ext_constant: float = float(os.getenv("CHSH_EXT_CONSTANT", "0"))
    spotcheck_completeness: str = os.getenv("CHSH_SPOTCHECK_COMPLETENESS", "hoeffding")
    # lower end of the alpha - 1 search
    alpha_gap_min: float = float(os.getenv("CHSH_ALPHA_GAP_MIN", "1e-6"))

settings = Settings()
