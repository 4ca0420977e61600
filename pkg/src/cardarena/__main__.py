from cardarena.cli import main

main()
