from arenaclient.main import main

raise SystemExit(main())
