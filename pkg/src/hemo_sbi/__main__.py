"""Allow ``python -m hemo_sbi``."""

from hemo_sbi.main import main

raise SystemExit(main())
