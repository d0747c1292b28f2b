from stmeta.cli import main

main()
