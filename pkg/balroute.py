#!/usr/bin/env python3
from balroute.main import main

main()
