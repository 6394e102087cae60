# Utils package: config parsing, metrics, replays, seeding
