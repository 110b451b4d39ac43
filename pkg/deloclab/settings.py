"""Environment driven defaults, loaded once from the process environment and an optional .env file."""

import os
from dotenv import load_dotenv

load_dotenv()

LAB_WORKERS = int(os.environ.get('LAB_WORKERS', '1'))
LAB_CHUNK_SIZE = int(os.environ.get('LAB_CHUNK_SIZE', str(1 << 16)))
LAB_LOG_LEVEL = os.environ.get('LAB_LOG_LEVEL', 'WARNING').upper()
LAB_PROGRESS = os.environ.get('LAB_PROGRESS', '0').lower() in ('1', 'true', 'yes')

# 95% two-sided normal quantile used for every reported ci_radius
Z95 = 1.959963984540054
