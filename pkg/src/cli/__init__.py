# Command-line front end: sub-command handlers.
